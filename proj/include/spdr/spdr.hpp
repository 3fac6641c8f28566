// Copyright (C) 2026 The spdr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "spdr/affine.hpp"
#include "spdr/biencoder.hpp"
#include "spdr/caption.hpp"
#include "spdr/embedding_set.hpp"
#include "spdr/error.hpp"
#include "spdr/eval.hpp"
#include "spdr/io.hpp"
#include "spdr/retrieval.hpp"
#include "spdr/rng.hpp"
#include "spdr/sae.hpp"
#include "spdr/sparse_vector.hpp"
#include "spdr/stats.hpp"
#include "spdr/synth.hpp"
