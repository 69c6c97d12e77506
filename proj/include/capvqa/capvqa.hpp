// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "capvqa/dataset.hpp"
#include "capvqa/error.hpp"
#include "capvqa/fusion.hpp"
#include "capvqa/harness/config.hpp"
#include "capvqa/harness/experiment.hpp"
#include "capvqa/harness/io.hpp"
#include "capvqa/metrics.hpp"
#include "capvqa/modeling/adapters.hpp"
#include "capvqa/modeling/head.hpp"
#include "capvqa/modeling/input.hpp"
#include "capvqa/modeling/regions.hpp"
#include "capvqa/modeling/toy_model.hpp"
#include "capvqa/normalize.hpp"
#include "capvqa/synthetic.hpp"
#include "capvqa/types.hpp"
#include "capvqa/vocab.hpp"
