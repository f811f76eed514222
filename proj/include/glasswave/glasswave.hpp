// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "glasswave/bank.hpp"
#include "glasswave/beamformer.hpp"
#include "glasswave/core.hpp"
#include "glasswave/evaluation.hpp"
#include "glasswave/fft.hpp"
#include "glasswave/geometry.hpp"
#include "glasswave/metrics.hpp"
#include "glasswave/room.hpp"
#include "glasswave/scene.hpp"
#include "glasswave/separation.hpp"
#include "glasswave/spectral.hpp"
#include "glasswave/wav.hpp"
