// SPDX-License-Identifier: Apache-2.0
#include "sgn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "sgn/errors.hpp"

namespace sgn {

void TrainRecipe::validate() const {
  if (!(lr0 > 0)) throw ConfigError("recipe: lr0 must be positive");
  if (epochs == 0) throw ConfigError("recipe: epochs must be positive");
  if (batch_size == 0) throw ConfigError("recipe: batch_size must be positive");
  if (!(decay_factor >= 1)) throw ConfigError("recipe: decay_factor must be >= 1");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (milestones[i] >= epochs || (i > 0 && milestones[i] <= milestones[i - 1])) {
      throw ConfigError("recipe: milestones must be strictly increasing and below epochs");
    }
  }
  if (!(weight_decay >= 0)) throw ConfigError("recipe: weight_decay must be >= 0");
  if (!(label_smoothing >= 0 && label_smoothing < 1)) {
    throw ConfigError("recipe: label_smoothing must be in [0, 1)");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0)) {
    throw ConfigError("recipe: Adam betas must be in [0, 1) and eps positive");
  }
  for (double d : rotation_degrees) {
    if (!(d >= 0)) throw ConfigError("recipe: rotation range must be >= 0");
  }
  if (!(val_fraction >= 0 && val_fraction < 1)) throw ConfigError("recipe: val_fraction must be in [0, 1)");
}

TrainRecipe TrainRecipe::full() { return {}; }

TrainRecipe TrainRecipe::desk() {
  TrainRecipe r;
  r.epochs = 40;
  r.milestones = {20, 30, 36};
  r.batch_size = 16;
  return r;
}

nlohmann::ordered_json to_json(const TrainRecipe& r) {
  nlohmann::ordered_json j;
  j["lr0"] = r.lr0;
  j["milestones"] = r.milestones;
  j["decay_factor"] = r.decay_factor;
  j["epochs"] = r.epochs;
  j["weight_decay"] = r.weight_decay;
  j["batch_size"] = r.batch_size;
  j["label_smoothing"] = r.label_smoothing;
  j["beta1"] = r.beta1;
  j["beta2"] = r.beta2;
  j["adam_eps"] = r.adam_eps;
  j["rotation_degrees"] = r.rotation_degrees;
  j["val_fraction"] = r.val_fraction;
  j["reference_joint"] = r.reference_joint;
  j["seed"] = r.seed;
  return j;
}

TrainRecipe train_recipe_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("recipe must be a JSON object");
  TrainRecipe r;
  if (j.value("schedule", std::string("full")) == "desk") r = TrainRecipe::desk();
  try {
    r.lr0 = j.value("lr0", r.lr0);
    r.milestones = j.value("milestones", r.milestones);
    r.decay_factor = j.value("decay_factor", r.decay_factor);
    r.epochs = j.value("epochs", r.epochs);
    r.weight_decay = j.value("weight_decay", r.weight_decay);
    r.batch_size = j.value("batch_size", r.batch_size);
    r.label_smoothing = j.value("label_smoothing", r.label_smoothing);
    r.beta1 = j.value("beta1", r.beta1);
    r.beta2 = j.value("beta2", r.beta2);
    r.adam_eps = j.value("adam_eps", r.adam_eps);
    r.rotation_degrees = j.value("rotation_degrees", r.rotation_degrees);
    r.val_fraction = j.value("val_fraction", r.val_fraction);
    r.reference_joint = j.value("reference_joint", r.reference_joint);
    r.seed = j.value("seed", r.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("recipe: ") + e.what());
  }
  r.validate();
  return r;
}

template <typename Real>
Var<Real> smoothed_cross_entropy(Var<Real> logits, std::span<const int> labels, double epsilon) {
  const Shape s = logits.shape();
  if (s.size() != 2) throw DimensionError("cross entropy: logits must be [B x K], got " + shape_string(s));
  const std::size_t B = s[0], K = s[1];
  if (labels.size() != B) {
    throw DimensionError("cross entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(B));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw DataError("cross entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(K) + ")");
    }
  }
  if (!(epsilon >= 0 && epsilon < 1)) throw ConfigError("cross entropy: smoothing must be in [0, 1)");
  const double off = epsilon / static_cast<double>(K);
  const double on = 1.0 - epsilon + off;
  // Softmax probabilities are kept for the backward rule.
  auto probs = std::make_shared<std::vector<double>>(B * K);
  std::vector<int> y(labels.begin(), labels.end());
  const Real* x = logits.value().data().data();
  double total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const Real* row = x + b * K;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double z = 0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
    const double log_z = std::log(z) + mx;
    for (std::size_t k = 0; k < K; ++k) {
      const double log_p = static_cast<double>(row[k]) - log_z;
      (*probs)[b * K + k] = std::exp(log_p);
      total -= (static_cast<std::size_t>(y[b]) == k ? on : off) * log_p;
    }
  }
  const std::size_t in = logits.id();
  return logits.tape().record(
      "smoothed_cross_entropy", Tensor<Real>::scalar(static_cast<Real>(total / B)), {logits},
      [probs, y = std::move(y), B, K, on, off, in](Tape<Real>& tape, std::size_t self) {
        if (!tape.needs_grad(in)) return;
        const double g = static_cast<double>(tape.grad(self)[0]) / static_cast<double>(B);
        auto dx = tape.grad(in);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t k = 0; k < K; ++k) {
            const double q = static_cast<std::size_t>(y[b]) == k ? on : off;
            dx[b * K + k] += static_cast<Real>(g * ((*probs)[b * K + k] - q));
          }
        }
      });
}

double lr_at_epoch(const TrainRecipe& r, std::size_t epoch) {
  if (epoch >= r.epochs) {
    throw ContractError("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(r.epochs) + ")");
  }
  double lr = r.lr0;
  for (std::size_t m : r.milestones) {
    if (m <= epoch) lr /= r.decay_factor;
  }
  return lr;
}

template <typename Real>
void adam_step(std::span<Tensor<Real>* const> params, std::span<const bool> decay,
               AdamState<Real>& state, double lr, double weight_decay, const AdamOptions& opt) {
  if (decay.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(decay.size()) + " decay flags for " +
                         std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty()) {
    for (Tensor<Real>* p : params) {
      state.m.emplace_back(p->size(), Real(0));
      state.v.emplace_back(p->size(), Real(0));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Real>& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) {
      throw DimensionError("adam_step: moment size " + std::to_string(m.size()) + " vs parameter " +
                           shape_string(p.shape()));
    }
    const bool has_grad = p.has_grad();
    const double wd = decay[i] ? weight_decay : 0.0;
    Real* w = p.data().data();
    const Real* g = has_grad ? p.grad().data() : nullptr;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double grad = (g ? static_cast<double>(g[j]) : 0.0) + wd * static_cast<double>(w[j]);
      const double mj = opt.beta1 * m[j] + (1 - opt.beta1) * grad;
      const double vj = opt.beta2 * v[j] + (1 - opt.beta2) * grad * grad;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      w[j] = static_cast<Real>(w[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + opt.eps));
    }
  }
}

SkeletonSequence preprocess(const SkeletonSequence& seq, std::size_t T, std::mt19937_64& rng,
                            bool augment, const TrainRecipe& recipe) {
  SkeletonSequence s = sample_clips(seq, T, rng);
  if (augment) s = random_rotation_augment(s, recipe.rotation_degrees, rng);
  return translate_to_reference(s, recipe.reference_joint);
}

template <typename Real>
Tensor<Real> stack_batch(std::span<const SkeletonSequence> batch) {
  if (batch.empty()) throw DataError("stack_batch: empty batch");
  const std::size_t T = batch[0].length(), J = batch[0].joints();
  Tensor<Real> out({batch.size(), T, J, 3});
  Real* d = out.data().data();
  for (const SkeletonSequence& s : batch) {
    if (s.length() != T || s.joints() != J) throw DimensionError("stack_batch: ragged batch");
    for (const Frame& f : s.frames) {
      for (const Point3& p : f) {
        for (double v : p) *d++ = static_cast<Real>(v);
      }
    }
  }
  return out;
}

void write_train_log_header(std::ostream& out) {
  out << "epoch,lr,train_loss,train_acc,val_acc,wall_seconds\n";
}

void write_train_log_row(std::ostream& out, const EpochLog& r) {
  out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.train_acc << ',';
  if (std::isnan(r.val_acc)) {
    out << "nan";
  } else {
    out << r.val_acc;
  }
  out << ',' << r.wall_seconds << '\n';
}

TrainValSplit split_train_val(const DatasetManifest& m, const TrainRecipe& recipe) {
  TrainValSplit out;
  out.train = m.with_split(Split::train);
  out.val = m.with_split(Split::val);
  if (!out.val.empty() || recipe.val_fraction == 0 || out.train.size() < 2) return out;
  // Hold out whole sources so person tracks of one recording stay together.
  std::vector<std::string> sources;
  std::map<std::string, std::vector<const SkeletonSequence*>> by_source;
  for (const SkeletonSequence* s : out.train) {
    auto [it, fresh] = by_source.try_emplace(s->source());
    if (fresh) sources.push_back(s->source());
    it->second.push_back(s);
  }
  std::mt19937_64 rng = derived_rng(recipe.seed, "validation-split");
  std::shuffle(sources.begin(), sources.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(recipe.val_fraction * sources.size()));
  std::map<std::string, bool> held;
  for (std::size_t i = 0; i < n_val && i + 1 < sources.size(); ++i) held[sources[i]] = true;
  std::vector<const SkeletonSequence*> train;
  for (const SkeletonSequence* s : out.train) {
    (held.count(s->source()) ? out.val : train).push_back(s);
  }
  out.train = std::move(train);
  return out;
}

template <typename Real>
double quick_accuracy(Model<Real>& model, std::span<const SkeletonSequence* const> sequences,
                      const TrainRecipe& recipe, std::uint64_t seed) {
  if (sequences.empty()) return std::numeric_limits<double>::quiet_NaN();
  const ModelConfig& cfg = model.config();
  std::size_t correct = 0;
  for (std::size_t start = 0; start < sequences.size(); start += recipe.batch_size) {
    const std::size_t end = std::min(sequences.size(), start + recipe.batch_size);
    std::vector<SkeletonSequence> batch;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      std::mt19937_64 rng = derived_rng(seed, sequences[i]->id);
      batch.push_back(preprocess(*sequences[i], cfg.T, rng, false, recipe));
      labels.push_back(sequences[i]->label);
    }
    Tape<Real> tape(false);
    const auto out = model.forward(tape, stack_batch<Real>(batch), false);
    const Real* logits = out.logits.value().data().data();
    for (std::size_t b = 0; b < labels.size(); ++b) {
      const Real* row = logits + b * cfg.K;
      const auto pred = static_cast<int>(std::max_element(row, row + cfg.K) - row);
      correct += pred == labels[b];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(sequences.size());
}

template <typename Real>
std::vector<EpochLog> train(Model<Real>& model, const DatasetManifest& manifest,
                            const TrainRecipe& recipe, const TrainCallbacks& callbacks) {
  recipe.validate();
  if (!model.initialized()) throw StateError("train: model is not initialized");
  const ModelConfig& cfg = model.config();
  if (manifest.J != cfg.J) {
    throw SchemaError("train: dataset has J=" + std::to_string(manifest.J) + ", model expects J=" +
                      std::to_string(cfg.J));
  }
  if (manifest.K > cfg.K) {
    throw SchemaError("train: dataset has K=" + std::to_string(manifest.K) + ", model has " +
                      std::to_string(cfg.K) + " outputs");
  }
  TrainValSplit split = split_train_val(manifest, recipe);
  if (split.train.empty()) throw DataError("train: dataset has no training sequences");

  std::vector<Tensor<Real>*> params;
  std::vector<bool> decay_flags;
  for (auto& t : model.tensors()) {
    if (!t.trainable()) continue;
    t.value.set_requires_grad(true);
    params.push_back(&t.value);
    decay_flags.push_back(t.decays());
  }
  const std::unique_ptr<bool[]> decay(new bool[decay_flags.size()]);
  std::copy(decay_flags.begin(), decay_flags.end(), decay.get());
  const std::span<const bool> decay_span(decay.get(), decay_flags.size());
  const AdamOptions opt{recipe.beta1, recipe.beta2, recipe.adam_eps};
  AdamState<Real> adam;
  std::vector<EpochLog> log;

  for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(recipe, epoch);
    std::vector<const SkeletonSequence*> order = split.train;
    std::mt19937_64 shuffle_rng = derived_rng(recipe.seed, "epoch-" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += recipe.batch_size) {
      const std::size_t end = std::min(order.size(), start + recipe.batch_size);
      std::vector<SkeletonSequence> batch;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        std::mt19937_64 rng = derived_rng(recipe.seed, order[i]->id + "@" + std::to_string(epoch));
        batch.push_back(preprocess(*order[i], cfg.T, rng, cfg.data_augmentation, recipe));
        labels.push_back(order[i]->label);
      }
      for (Tensor<Real>* p : params) p->zero_grad();
      Tape<Real> tape;
      const auto out = model.forward(tape, stack_batch<Real>(batch), true);
      const Var<Real> loss = smoothed_cross_entropy(out.logits, labels, recipe.label_smoothing);
      const double value = static_cast<double>(loss.value().item());
      if (!std::isfinite(value)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(model.step()));
      }
      tape.backward(loss);
      adam_step<Real>(params, decay_span, adam, lr, recipe.weight_decay, opt);
      model.set_step(model.step() + 1);
      loss_sum += value * static_cast<double>(labels.size());
      const Real* logits = out.logits.value().data().data();
      for (std::size_t b = 0; b < labels.size(); ++b) {
        const Real* row = logits + b * cfg.K;
        correct += static_cast<int>(std::max_element(row, row + cfg.K) - row) == labels[b];
      }
    }
    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    row.val_acc = quick_accuracy(model, split.val, recipe, recipe.seed);
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(row);
    if (callbacks.on_epoch) callbacks.on_epoch(row);
  }
  for (Tensor<Real>* p : params) {
    p->zero_grad();
    p->set_requires_grad(false);
  }
  return log;
}

#define SGN_INSTANTIATE_TRAINING(R)                                                            \
  template Var<R> smoothed_cross_entropy<R>(Var<R>, std::span<const int>, double);             \
  template void adam_step<R>(std::span<Tensor<R>* const>, std::span<const bool>, AdamState<R>&, \
                             double, double, const AdamOptions&);                              \
  template Tensor<R> stack_batch<R>(std::span<const SkeletonSequence>);                        \
  template double quick_accuracy<R>(Model<R>&, std::span<const SkeletonSequence* const>,       \
                                    const TrainRecipe&, std::uint64_t);                        \
  template std::vector<EpochLog> train<R>(Model<R>&, const DatasetManifest&, const TrainRecipe&, \
                                          const TrainCallbacks&);

SGN_INSTANTIATE_TRAINING(float)
SGN_INSTANTIATE_TRAINING(double)

}  // namespace sgn
