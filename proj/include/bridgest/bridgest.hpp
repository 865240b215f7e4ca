#pragma once

#include "bridgest/errors.hpp"
#include "bridgest/numerics/adam.hpp"
#include "bridgest/numerics/grad_check.hpp"
#include "bridgest/numerics/ops.hpp"
#include "bridgest/numerics/parameter_store.hpp"
#include "bridgest/numerics/random.hpp"
#include "bridgest/numerics/tensor.hpp"

#include "bridgest/datakit/bucketing.hpp"
#include "bridgest/datakit/manifest.hpp"
#include "bridgest/datakit/segment.hpp"
#include "bridgest/datakit/stats.hpp"
#include "bridgest/datakit/synth.hpp"
#include "bridgest/datakit/utterance.hpp"

#include "bridgest/textkit/bleu.hpp"
#include "bridgest/textkit/cot.hpp"
#include "bridgest/textkit/tokenize.hpp"
#include "bridgest/textkit/utf8.hpp"
#include "bridgest/textkit/vocab.hpp"

#include "bridgest/model/bridge_model.hpp"
#include "bridgest/model/checkpoint.hpp"
#include "bridgest/model/config.hpp"
#include "bridgest/model/decoder.hpp"
#include "bridgest/model/encoder.hpp"
#include "bridgest/model/fusion.hpp"
#include "bridgest/model/lora.hpp"
#include "bridgest/model/qformer.hpp"

#include "bridgest/training/curriculum.hpp"
#include "bridgest/training/freeze.hpp"
#include "bridgest/training/schedule.hpp"
#include "bridgest/training/trainer.hpp"
#include "bridgest/training/pipeline.hpp"
#include "bridgest/model/grad_suite.hpp"
