#pragma once

// Everything except the network transport (annonet/http_transport.hpp).

#include "annonet/codebook.hpp"
#include "annonet/core.hpp"
#include "annonet/corpus.hpp"
#include "annonet/dataset.hpp"
#include "annonet/error.hpp"
#include "annonet/eval.hpp"
#include "annonet/finetune.hpp"
#include "annonet/gateway.hpp"
#include "annonet/io.hpp"
#include "annonet/live_backend.hpp"
#include "annonet/output_parser.hpp"
#include "annonet/pipeline.hpp"
#include "annonet/rules.hpp"
#include "annonet/text.hpp"
#include "annonet/topics.hpp"
