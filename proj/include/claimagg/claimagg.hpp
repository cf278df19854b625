#pragma once

#include "claimagg/centrality.hpp"
#include "claimagg/checksum.hpp"
#include "claimagg/clustering.hpp"
#include "claimagg/corpus.hpp"
#include "claimagg/embedding.hpp"
#include "claimagg/error.hpp"
#include "claimagg/evaluate.hpp"
#include "claimagg/http.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/leiden.hpp"
#include "claimagg/matrix.hpp"
#include "claimagg/pipeline.hpp"
#include "claimagg/random.hpp"
#include "claimagg/review.hpp"
#include "claimagg/simgraph.hpp"
#include "claimagg/stub_sidecar.hpp"
#include "claimagg/summarize.hpp"
#include "claimagg/synthetic.hpp"
