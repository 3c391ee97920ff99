// Offline training (Adam, early stopping on validation macro F1), evaluation
// (confusion matrix, per-class and macro F1) and single-window inference
// latency benchmarking across input configurations.
#pragma once

#include "mmhar/models.hpp"
#include "mmhar/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace mmhar {

struct Dataset {
  std::vector<Window> windows;
  SplitIndices splits;
  SplitStats stats_train, stats_val, stats_test;
  StatsSource stats_source = StatsSource::PerSplit;
  ImuRanges ranges;
};

// Split + standardization statistics in one step. PerSplit computes stats
// within each split (the literal offline procedure); TrainOnly applies train
// statistics everywhere.
inline Dataset prepare_dataset(std::vector<Window> windows, const std::array<double, 3>& fractions,
                               std::uint64_t seed, StatsSource source, int target_size,
                               const ImuRanges& ranges = {}) {
  Dataset ds;
  ds.windows = std::move(windows);
  ds.splits = split_dataset(ds.windows, fractions, seed);
  ds.stats_source = source;
  ds.ranges = ranges;
  ds.stats_train = compute_image_stats(ds.windows, ds.splits.train, target_size);
  if (source == StatsSource::PerSplit) {
    ds.stats_val = ds.splits.val.empty() ? ds.stats_train
                                         : compute_image_stats(ds.windows, ds.splits.val, target_size);
    ds.stats_test = ds.splits.test.empty() ? ds.stats_train
                                           : compute_image_stats(ds.windows, ds.splits.test, target_size);
  } else {
    ds.stats_val = ds.stats_train;
    ds.stats_test = ds.stats_train;
  }
  return ds;
}

template <class S>
Sample<S> make_sample(const Window& w, const InputModality& m, const SplitStats& stats,
                      const ImuRanges& ranges) {
  Sample<S> s;
  if (m.needs_imu()) s.imu = window_imu_input<S>(w, *m.config, ranges);
  if (m.needs_top()) s.top = window_frames_input<S>(w, /*bottom=*/false, stats);
  if (m.needs_bottom()) s.bottom = window_frames_input<S>(w, /*bottom=*/true, stats);
  return s;
}

struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses> counts =
      Eigen::Matrix<std::int64_t, kNumClasses, kNumClasses>::Zero();  // rows: truth, cols: prediction

  void record(ActionLabel truth, ActionLabel pred) { ++counts(index_of(truth), index_of(pred)); }
  std::int64_t total() const { return counts.sum(); }

  void to_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    out << "truth\\pred";
    for (int c = 0; c < kNumClasses; ++c) out << "," << label_names()[static_cast<std::size_t>(c)];
    out << "\n";
    for (int r = 0; r < kNumClasses; ++r) {
      out << label_names()[static_cast<std::size_t>(r)];
      for (int c = 0; c < kNumClasses; ++c) out << "," << counts(r, c);
      out << "\n";
    }
  }
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  std::int64_t predicted = 0;
};

struct Metrics {
  std::array<ClassScore, kNumClasses> per_class{};
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

// Macro F1 averages over classes that appear in the truth or the predictions;
// a class with precision + recall == 0 contributes an F1 of 0.
inline Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  Metrics m;
  const auto& c = cm.counts;
  const std::int64_t total = cm.total();
  std::int64_t diag = 0;
  double f1_sum = 0.0;
  int present = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    ClassScore& s = m.per_class[static_cast<std::size_t>(k)];
    s.support = c.row(k).sum();
    s.predicted = c.col(k).sum();
    const std::int64_t tp = c(k, k);
    diag += tp;
    s.precision = s.predicted > 0 ? static_cast<double>(tp) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support > 0 ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (s.support > 0 || s.predicted > 0) {
      f1_sum += s.f1;
      ++present;
    }
  }
  m.macro_f1 = present > 0 ? f1_sum / present : 0.0;
  m.accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  return m;
}

// Argmax with ties to the lowest class index.
template <class S>
int argmax_row(const Mat<S>& logits) {
  int best = 0;
  for (Eigen::Index j = 1; j < logits.cols(); ++j)
    if (logits(0, j) > logits(0, best)) best = static_cast<int>(j);
  return best;
}

template <class S>
std::vector<ActionLabel> predict_labels(const Model<S>& model, const std::vector<Window>& windows,
                                        const std::vector<int>& indices, const SplitStats& stats,
                                        const ImuRanges& ranges) {
  std::vector<ActionLabel> preds(indices.size());
  parallel_for(static_cast<int>(indices.size()), [&](int i) {
    const Window& w = windows[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
    ag::Tape<S> tape(/*grad=*/false);
    const Sample<S> sample = make_sample<S>(w, model.modality(), stats, ranges);
    const ag::Var out = model.logits(tape, sample, nullptr);
    preds[static_cast<std::size_t>(i)] = label_from_index(argmax_row(tape.val(out)));
  });
  return preds;
}

struct EvalResult {
  Metrics metrics;
  ConfusionMatrix confusion;
  std::vector<ActionLabel> predictions;  // in `indices` order
};

template <class S>
EvalResult evaluate(const Model<S>& model, const std::vector<Window>& windows,
                    const std::vector<int>& indices, const SplitStats& stats,
                    const ImuRanges& ranges = {}) {
  EvalResult res;
  res.predictions = predict_labels(model, windows, indices, stats, ranges);
  for (std::size_t i = 0; i < indices.size(); ++i)
    res.confusion.record(windows[static_cast<std::size_t>(indices[i])].label, res.predictions[i]);
  res.metrics = metrics_from_confusion(res.confusion);
  return res;
}

template <class S>
EvalResult evaluate(const Checkpoint& ck, const std::vector<Window>& windows,
                    const std::vector<int>& indices, const SplitStats& stats) {
  const auto model = ck.template instantiate<S>();
  return evaluate<S>(*model, windows, indices, stats, ck.norm.ranges);
}

struct TrainSpec {
  double learning_rate = 3e-4;
  int batch_size = 8;
  int max_epochs = 200;
  int patience = 20;  // epochs without validation macro-F1 improvement
  std::uint64_t seed = 7;
  bool track_train_accuracy = false;
  double stop_at_train_accuracy = -1.0;  // early exit for overfitting runs; <=0 disables

  void validate() const {
    if (!(learning_rate > 0.0) || batch_size < 1 || max_epochs < 1 || patience < 1)
      throw ConfigError("invalid training spec");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
  double train_accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
};

// Cross-entropy training; the checkpoint holds the parameters at the best
// validation macro F1 and freezes the train-split standardization statistics.
template <class S>
TrainResult train(const InputModality& modality, const ModelPresets& presets, const Dataset& ds,
                  const TrainSpec& spec, const std::string& preset_name = "desk") {
  spec.validate();
  if (ds.splits.train.empty()) throw Error("train split is empty");
  if (ds.splits.val.empty()) throw Error("validation split is empty");

  auto model = build_model<S>(modality, presets, spec.seed);
  auto& store = model->params();
  nn::Adam<S> opt(spec.learning_rate);

  std::vector<Mat<S>> best_params;
  double best_f1 = -1.0;
  int best_epoch = 0;
  int stale = 0;
  TrainResult result;

  struct SampleGrad {
    double loss = 0.0;
    std::vector<Mat<S>> grads;
  };

  for (int epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    std::vector<int> order = ds.splits.train;
    Rng shuffle_rng(mix_seed(spec.seed, hash_str("epoch-order"), static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int loss_count = 0;
    int step = 0;
    for (std::size_t off = 0; off < order.size(); off += static_cast<std::size_t>(spec.batch_size), ++step) {
      const int bsz = static_cast<int>(std::min<std::size_t>(spec.batch_size, order.size() - off));
      std::vector<SampleGrad> partial(static_cast<std::size_t>(bsz));
      parallel_for(bsz, [&](int i) {
        const Window& w = ds.windows[static_cast<std::size_t>(order[off + static_cast<std::size_t>(i)])];
        ag::Tape<S> tape(/*grad=*/true);
        Rng drop_rng(mix_seed(spec.seed, hash_str("dropout"), static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i)));
        nn::TrainCtx ctx{true, &drop_rng};
        const Sample<S> sample = make_sample<S>(w, modality, ds.stats_train, ds.ranges);
        const ag::Var logits = model->logits(tape, sample, &ctx);
        const ag::Var loss = tape.softmax_cross_entropy(logits, index_of(w.label));
        tape.backward(loss);
        SampleGrad& sg = partial[static_cast<std::size_t>(i)];
        sg.loss = static_cast<double>(tape.val(loss)(0, 0));
        sg.grads.resize(static_cast<std::size_t>(store.size()));
        for (int s = 0; s < store.size(); ++s)
          if (const Mat<S>* g = tape.param_grad(s)) sg.grads[static_cast<std::size_t>(s)] = *g;
      });

      // Deterministic reduction in sample order.
      std::vector<Mat<S>> grads(static_cast<std::size_t>(store.size()));
      double batch_loss = 0.0;
      for (int i = 0; i < bsz; ++i) {
        batch_loss += partial[static_cast<std::size_t>(i)].loss;
        for (int s = 0; s < store.size(); ++s) {
          Mat<S>& g = partial[static_cast<std::size_t>(i)].grads[static_cast<std::size_t>(s)];
          if (g.size() == 0) continue;
          if (grads[static_cast<std::size_t>(s)].size() == 0)
            grads[static_cast<std::size_t>(s)] = std::move(g);
          else
            grads[static_cast<std::size_t>(s)] += g;
        }
      }
      batch_loss /= bsz;
      if (!std::isfinite(batch_loss))
        throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(step));
      for (auto& g : grads)
        if (g.size() > 0) g /= static_cast<S>(bsz);
      opt.step(store, grads);
      loss_sum += batch_loss * bsz;
      loss_count += bsz;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / loss_count;

    {
      const auto preds = predict_labels<S>(*model, ds.windows, ds.splits.val, ds.stats_val, ds.ranges);
      ConfusionMatrix cm;
      for (std::size_t i = 0; i < preds.size(); ++i)
        cm.record(ds.windows[static_cast<std::size_t>(ds.splits.val[i])].label, preds[i]);
      rec.val_macro_f1 = metrics_from_confusion(cm).macro_f1;
    }

    bool reached_target = false;
    if (spec.track_train_accuracy || spec.stop_at_train_accuracy > 0.0) {
      const auto preds = predict_labels<S>(*model, ds.windows, ds.splits.train, ds.stats_train, ds.ranges);
      int hit = 0;
      for (std::size_t i = 0; i < preds.size(); ++i)
        hit += preds[i] == ds.windows[static_cast<std::size_t>(ds.splits.train[i])].label ? 1 : 0;
      rec.train_accuracy = static_cast<double>(hit) / static_cast<double>(preds.size());
      reached_target = spec.stop_at_train_accuracy > 0.0 && rec.train_accuracy >= spec.stop_at_train_accuracy;
    }
    result.history.push_back(rec);

    if (rec.val_macro_f1 > best_f1) {
      best_f1 = rec.val_macro_f1;
      best_epoch = epoch;
      stale = 0;
      best_params.clear();
      for (int s = 0; s < store.size(); ++s) best_params.push_back(store.value(s));
    } else {
      ++stale;
    }
    if (reached_target) break;
    if (stale >= spec.patience) break;
  }

  if (!best_params.empty())
    for (int s = 0; s < store.size(); ++s) store.value(s) = best_params[static_cast<std::size_t>(s)];

  NormMeta norm;
  norm.image_stats = ds.stats_train;
  norm.stats_source = ds.stats_source;
  norm.ranges = ds.ranges;
  result.checkpoint = make_checkpoint(*model, preset_name, norm);
  result.best_epoch = best_epoch;
  result.best_val_f1 = best_f1;
  return result;
}

inline void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& hist) {
  std::ofstream out(path);
  out << "epoch,train_loss,val_macro_f1,train_accuracy\n";
  for (const auto& r : hist) {
    out << r.epoch << "," << r.train_loss << "," << r.val_macro_f1 << ",";
    if (std::isnan(r.train_accuracy))
      out << "";
    else
      out << r.train_accuracy;
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Latency benchmarking.

struct LatencyRow {
  std::string modality;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double ratio_vs_mbc = 0.0;  // against the MBC-8FG entry
  bool sustains_30hz = false;
};

// Deterministic pseudo-input matching a model's contract shapes.
template <class S>
Sample<S> synthetic_sample(const InputModality& m, const ModelPresets& presets, std::uint64_t seed) {
  Rng rng(mix_seed(seed, hash_str("bench-input"), hash_str(m.name())));
  Sample<S> s;
  if (m.needs_imu()) {
    s.imu.resize(presets.hart.seq_len, feature_width(*m.config));
    for (Eigen::Index i = 0; i < s.imu.rows(); ++i)
      for (Eigen::Index j = 0; j < s.imu.cols(); ++j) s.imu(i, j) = static_cast<S>(rng.uniform(-1.0, 1.0));
  }
  auto fill_frames = [&](Mat<S>& dst) {
    dst.resize(presets.vivit.frames, presets.vivit.image_size * presets.vivit.image_size);
    for (Eigen::Index i = 0; i < dst.rows(); ++i)
      for (Eigen::Index j = 0; j < dst.cols(); ++j) dst(i, j) = static_cast<S>(rng.gaussian());
  };
  if (m.needs_top()) fill_frames(s.top);
  if (m.needs_bottom()) fill_frames(s.bottom);
  return s;
}

// Wall-clock single-window inference after warm-up. Requires an MBC-8FG entry
// as the ratio baseline.
template <class S>
std::vector<LatencyRow> benchmark_latency(const std::vector<Checkpoint>& checkpoints, int repetitions) {
  if (repetitions < 30) throw Error("benchmark_latency requires at least 30 repetitions");
  int baseline = -1;
  for (std::size_t i = 0; i < checkpoints.size(); ++i)
    if (checkpoints[i].modality == "MBC-8FG") baseline = static_cast<int>(i);
  if (baseline < 0) throw Error("benchmark_latency requires an MBC-8FG baseline checkpoint");

  std::vector<LatencyRow> rows;
  for (const auto& ck : checkpoints) {
    const auto model = ck.template instantiate<S>();
    const Sample<S> input = synthetic_sample<S>(model->modality(), model->presets(), 1234);
    auto run_once = [&] {
      ag::Tape<S> tape(/*grad=*/false);
      const ag::Var out = model->logits(tape, input, nullptr);
      return tape.val(out)(0, 0);
    };
    volatile S sink{};
    for (int i = 0; i < 3; ++i) sink = run_once();
    std::vector<double> ms(static_cast<std::size_t>(repetitions));
    for (int i = 0; i < repetitions; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      sink = run_once();
      const auto t1 = std::chrono::steady_clock::now();
      ms[static_cast<std::size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    (void)sink;
    LatencyRow row;
    row.modality = ck.modality;
    row.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / repetitions;
    double var = 0.0;
    for (double v : ms) var += (v - row.mean_ms) * (v - row.mean_ms);
    row.std_ms = std::sqrt(var / repetitions);
    row.sustains_30hz = row.mean_ms < 1000.0 / 30.0;
    rows.push_back(row);
  }
  const double base_ms = rows[static_cast<std::size_t>(baseline)].mean_ms;
  for (auto& r : rows) r.ratio_vs_mbc = r.mean_ms / base_ms;
  return rows;
}

}  // namespace mmhar
