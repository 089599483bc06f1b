#pragma once

#include "searchgym/corpus.hpp"
#include "searchgym/embedding.hpp"
#include "searchgym/episode.hpp"
#include "searchgym/errors.hpp"
#include "searchgym/eval.hpp"
#include "searchgym/protocol.hpp"
#include "searchgym/remote.hpp"
#include "searchgym/retrieval.hpp"
#include "searchgym/rewards.hpp"
#include "searchgym/server.hpp"
#include "searchgym/synthetic.hpp"
#include "searchgym/text.hpp"
#include "searchgym/tools.hpp"
