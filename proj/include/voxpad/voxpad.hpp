// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Umbrella header: the whole engine.

#include "voxpad/checkpoint.hpp"
#include "voxpad/config.hpp"
#include "voxpad/conv.hpp"
#include "voxpad/corner.hpp"
#include "voxpad/dense_reference.hpp"
#include "voxpad/error.hpp"
#include "voxpad/gradcheck.hpp"
#include "voxpad/interp.hpp"
#include "voxpad/keys.hpp"
#include "voxpad/layers.hpp"
#include "voxpad/loss.hpp"
#include "voxpad/matrix.hpp"
#include "voxpad/metrics.hpp"
#include "voxpad/optim.hpp"
#include "voxpad/padding.hpp"
#include "voxpad/pointcloud.hpp"
#include "voxpad/rng.hpp"
#include "voxpad/sparse_tensor.hpp"
#include "voxpad/synth.hpp"
#include "voxpad/train.hpp"
#include "voxpad/unet.hpp"
#include "voxpad/voxelize.hpp"
