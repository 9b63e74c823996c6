// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "smru/audio.hpp"
#include "smru/complexity.hpp"
#include "smru/config.hpp"
#include "smru/errors.hpp"
#include "smru/fft.hpp"
#include "smru/laec.hpp"
#include "smru/losses.hpp"
#include "smru/model.hpp"
#include "smru/nn.hpp"
#include "smru/pipeline.hpp"
#include "smru/rng.hpp"
#include "smru/scenario.hpp"
#include "smru/stft.hpp"
#include "smru/stream.hpp"
#include "smru/tensor.hpp"
#include "smru/weights.hpp"
