// Copyright 2026 The nnel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "nnel/candidates.hpp"
#include "nnel/corpus.hpp"
#include "nnel/embeddings.hpp"
#include "nnel/error.hpp"
#include "nnel/eval.hpp"
#include "nnel/external.hpp"
#include "nnel/hash_embed.hpp"
#include "nnel/kb.hpp"
#include "nnel/marking.hpp"
#include "nnel/pipeline.hpp"
#include "nnel/protocol.hpp"
#include "nnel/ranking.hpp"
#include "nnel/retrieval.hpp"
