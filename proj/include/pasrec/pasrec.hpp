#pragma once

#include "pasrec/evaluator.hpp"
#include "pasrec/ingest.hpp"
#include "pasrec/neighbor_index.hpp"
#include "pasrec/predictor.hpp"
#include "pasrec/similarity.hpp"
#include "pasrec/sparsity.hpp"
#include "pasrec/synth.hpp"
#include "pasrec/types.hpp"
