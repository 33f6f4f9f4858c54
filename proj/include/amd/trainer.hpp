#pragma once

#include "amd/codec.hpp"
#include "amd/config.hpp"
#include "amd/corpus.hpp"
#include "amd/metrics.hpp"
#include "amd/model.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace amd {

// The five joint-objective terms plus their sum, as plain numbers for
// logging and tests. total is always the recomputed sum of the parts.
struct LossBundle {
  double ape = 0, img = 0, dbm = 0, trp = 0, lm = 0;
  double total = 0;
};

// One training example with its pixels attached.
struct TrainItem {
  MediaSample meta;
  Image image;
};

// Reads every sample's image from disk.
std::vector<TrainItem> load_items(const Corpus& corpus);

template <typename S>
using GradMap = std::map<std::string, Mat<S>>;

// Evaluates the joint objective on one batch: artifact-presence and
// modal-guidance terms average over the batch, grounding averages over the
// boxed samples, the language term averages over non-PAD target tokens, and
// the token-regularization term depends only on the artifact bank. When
// grads is given, d(total)/d(param) is accumulated into it per tensor name.
template <typename S>
LossBundle forward_all(const Model<S>& model, const std::vector<TrainItem>& batch,
                       GradMap<S>* grads = nullptr);

// Decoupled-weight-decay Adam state, lazily keyed by tensor name.
template <typename S>
struct AdamW {
  struct Slot {
    Mat<S> m, v;
  };
  std::map<std::string, Slot> slots;
  int64_t t = 0;
};

// One optimizer step at the given schedule position. The frozen encoder copy
// is never touched. Throws TrainError naming the offending term if any loss
// comes out non-finite.
template <typename S>
LossBundle train_step(Model<S>& model, const std::vector<TrainItem>& batch,
                      AdamW<S>& opt, const TrainConfig& cfg, int step);

struct TrainResult {
  std::vector<LossBundle> history;  // one bundle per step
};

// Full training loop: epoch-shuffled batches, optional horizontal-flip
// augmentation (skipped in deterministic mode), and an optional JSON-lines
// metrics stream with one record per step.
TrainResult train(Model<float>& model, const std::vector<TrainItem>& items,
                  const TrainConfig& cfg, std::ostream* metrics_log = nullptr);

struct InferResult {
  Prediction pred;
  // Per-type confidence (FS, FA, TF) read off the first decoded position's
  // option-letter probabilities.
  std::array<double, 3> type_scores{};
  bool has_scores = false;
};

// Auxiliary-head-free inference: embed, refine the artifact bank through the
// frozen encoder, splice, encode, greedy decode, parse. None of the
// classifier/detector/pooling heads used by the training losses are read.
template <typename S>
InferResult infer(const Model<S>& model, const Image& image, const std::string& text);

// Runs infer over a whole item list and pairs predictions with ground truth.
template <typename S>
std::vector<SampleEval> evaluate(const Model<S>& model,
                                 const std::vector<TrainItem>& items);

}  // namespace amd
