// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "laha/error.hpp"
#include "laha/io.hpp"
#include "laha/random.hpp"
#include "laha/numeric/grad_check.hpp"
#include "laha/numeric/matrix.hpp"
#include "laha/numeric/tape.hpp"
#include "laha/data/corpus.hpp"
#include "laha/data/synthetic.hpp"
#include "laha/data/vocabulary.hpp"
#include "laha/data/word_vectors.hpp"
#include "laha/labelgraph/graph.hpp"
#include "laha/labelgraph/skipgram.hpp"
#include "laha/labelgraph/walks.hpp"
#include "laha/model/attention_export.hpp"
#include "laha/model/forward.hpp"
#include "laha/model/layers.hpp"
#include "laha/model/params.hpp"
#include "laha/training/adam.hpp"
#include "laha/training/checkpoint.hpp"
#include "laha/training/loss.hpp"
#include "laha/training/sampler.hpp"
#include "laha/training/trainer.hpp"
#include "laha/metrics/evaluate.hpp"
#include "laha/metrics/histogram.hpp"
#include "laha/metrics/ranking.hpp"
#include "laha/app/config.hpp"
#include "laha/app/commands.hpp"
