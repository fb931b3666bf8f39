#include "adnet/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "adnet/errors.hpp"
#include "adnet/rng.hpp"
#include "adnet/tape.hpp"

namespace fs = std::filesystem;

namespace adnet {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t argmax_low(const std::vector<double>& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

std::vector<double> softmax_row(const std::vector<double>& z) {
  std::vector<double> p(z.size());
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

EvalOutputs run_inference(Network<double>& net, const LoadedDataset& data,
                          std::size_t batch_size) {
  if (batch_size == 0) throw ParameterError("run_inference: batch size must be positive");
  const std::size_t n = data.size();
  const std::size_t hw = data.input_height * data.input_width;
  EvalOutputs out;
  out.writer_logits.reserve(n);
  out.writer_probs.reserve(n);
  out.aux_logits.reserve(n);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t b = std::min(batch_size, n - start);
    Tensor batch = Tensor::zeros({b, 1, data.input_height, data.input_width});
    for (std::size_t i = 0; i < b; ++i)
      std::memcpy(batch.values.data() + i * hw, data.images[start + i].values.data(),
                  hw * sizeof(double));
    Tape tape;
    auto fwd = net.forward(tape, std::move(batch), false, nullptr);
    const auto& wl = tape.value(fwd.writer_logits);
    const auto& al = tape.value(fwd.aux_logits);
    const std::size_t kw = wl.dim(1), ka = al.dim(1);
    for (std::size_t i = 0; i < b; ++i) {
      std::vector<double> wrow(wl.values.begin() + i * kw, wl.values.begin() + (i + 1) * kw);
      std::vector<double> arow(al.values.begin() + i * ka, al.values.begin() + (i + 1) * ka);
      out.writer_probs.push_back(softmax_row(wrow));
      out.writer_logits.push_back(std::move(wrow));
      out.aux_logits.push_back(std::move(arow));
    }
  }
  return out;
}

double topk_accuracy(const std::vector<std::vector<double>>& scores,
                     const std::vector<std::size_t>& labels, std::size_t k) {
  if (scores.empty()) throw DataError("topk_accuracy: no rows");
  const std::size_t classes = scores[0].size();
  if (k < 1 || k > classes)
    throw ParameterError("topk_accuracy: k=" + std::to_string(k) +
                         " outside [1," + std::to_string(classes) + "]");
  if (labels.size() != scores.size())
    throw DimensionError("topk_accuracy: labels/scores length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& row = scores[i];
    const std::size_t label = labels[i];
    if (label >= classes) throw LabelError("topk_accuracy: label out of range");
    const double ls = row[label];
    std::size_t rank = 0;  // classes ranked strictly ahead of the label
    for (std::size_t j = 0; j < classes; ++j) {
      if (row[j] > ls || (row[j] == ls && j < label)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

std::size_t fuse_predict(const std::vector<const std::vector<double>*>& outputs) {
  if (outputs.empty()) throw DataError("fuse_predict: no outputs");
  std::vector<double> mean(outputs[0]->size(), 0.0);
  for (const auto* o : outputs) {
    if (o->size() != mean.size()) throw DimensionError("fuse_predict: ragged outputs");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*o)[i];
  }
  for (double& v : mean) v /= static_cast<double>(outputs.size());
  return argmax_low(mean);
}

MetricsReport evaluate(Network<double>& net, const LoadedDataset& test,
                       const EvalRequest& request) {
  if (test.size() == 0) throw DataError("evaluate: test set is empty");
  const EvalOutputs ev = run_inference(net, test, request.batch_size);
  const NetworkConfig& cfg = net.config();

  std::vector<std::size_t> writer_labels(test.size());
  for (std::size_t i = 0; i < test.size(); ++i)
    writer_labels[i] = test.labels[i].writer_class;

  MetricsReport rep;
  rep.writer_top1 = topk_accuracy(ev.writer_probs, writer_labels, 1);
  rep.writer_top5 =
      topk_accuracy(ev.writer_probs, writer_labels, std::min<std::size_t>(5, cfg.writer_classes));

  rep.aux_task = to_string(cfg.aux.kind);
  if (!cfg.aux.multi_label()) {
    std::vector<std::size_t> aux_labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
      aux_labels[i] = cfg.aux.kind == AuxTaskKind::kWordRecognition
                          ? test.labels[i].word_class
                          : test.labels[i].length_class;
    rep.aux_metrics["top1"] = topk_accuracy(ev.aux_logits, aux_labels, 1);
    rep.aux_metrics["top5"] = topk_accuracy(
        ev.aux_logits, aux_labels, std::min<std::size_t>(5, cfg.aux.width()));
  } else {
    // sigmoid(z) >= 0.5 is z >= 0
    std::size_t bit_hits = 0, exact = 0;
    const std::size_t width = cfg.aux.width();
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& ls = test.labels[i];
      std::size_t row_hits = 0;
      for (std::size_t j = 0; j < width; ++j) {
        const int target = cfg.aux.kind == AuxTaskKind::kCharAttributes
                               ? ls.char_attrs[j]
                               : ls.combined_attrs[j];
        const int pred = ev.aux_logits[i][j] >= 0.0 ? 1 : 0;
        if (pred == target) ++row_hits;
      }
      bit_hits += row_hits;
      if (row_hits == width) ++exact;
    }
    rep.aux_metrics["bit_accuracy"] =
        static_cast<double>(bit_hits) / static_cast<double>(test.size() * width);
    rep.aux_metrics["exact_match"] =
        static_cast<double>(exact) / static_cast<double>(test.size());
  }

  // single-image predictions drive both breakdowns
  std::vector<std::size_t> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) pred[i] = argmax_low(ev.writer_probs[i]);

  std::map<std::size_t, std::pair<std::size_t, std::size_t>> len_counts;  // len -> {n, hits}
  std::map<char, std::pair<std::size_t, std::size_t>> char_counts;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const bool hit = pred[i] == writer_labels[i];
    auto& lc = len_counts[test.labels[i].length_class + 1];
    ++lc.first;
    lc.second += hit;
    std::set<char> letters(test.words[i].begin(), test.words[i].end());
    for (char c : letters) {
      auto& cc = char_counts[c];
      ++cc.first;
      cc.second += hit;
    }
  }
  for (const auto& [len, nc] : len_counts)
    rep.per_length[len] = LengthBucket{nc.first,
                                       static_cast<double>(nc.second) / nc.first,
                                       nc.first < 20};
  for (const auto& [c, nc] : char_counts)
    rep.per_char[c] = CharBucket{nc.first, static_cast<double>(nc.second) / nc.first};

  // N-word fusion
  std::map<std::size_t, std::vector<std::size_t>> by_writer;
  for (std::size_t i = 0; i < test.size(); ++i) by_writer[writer_labels[i]].push_back(i);
  const RngStream base(request.seed);
  for (std::size_t n_words : request.fuse_n) {
    if (n_words == 0) throw ParameterError("fusion: N must be positive");
    for (const auto& [writer, samples] : by_writer)
      if (samples.size() < n_words)
        throw DataError("fusion: writer class " + std::to_string(writer) + " has only " +
                        std::to_string(samples.size()) + " test samples; N=" +
                        std::to_string(n_words));
    std::size_t hits = 0, trials = 0;
    for (std::size_t rep_i = 0; rep_i < request.repetitions; ++rep_i) {
      for (const auto& [writer, samples] : by_writer) {
        RngStream s = base.split("fusion").split(n_words).split(rep_i).split(writer);
        std::vector<std::size_t> pool = samples;
        std::vector<const std::vector<double>*> chosen;
        for (std::size_t j = 0; j < n_words; ++j) {
          const std::size_t pick = j + static_cast<std::size_t>(s.below(pool.size() - j));
          std::swap(pool[j], pool[pick]);
          chosen.push_back(request.fuse_pre_softmax ? &ev.writer_logits[pool[j]]
                                                    : &ev.writer_probs[pool[j]]);
        }
        hits += fuse_predict(chosen) == writer;
        ++trials;
      }
    }
    rep.fusion_curve[n_words] = static_cast<double>(hits) / static_cast<double>(trials);
  }
  return rep;
}

void write_metrics_csvs(const std::string& dir, const MetricsReport& rep) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create metrics dir " + dir + ": " + ec.message());
  {
    std::ofstream os(fs::path(dir) / "metrics.csv");
    if (!os) throw StorageError("cannot write metrics.csv");
    os << "task,metric,value\n";
    os << "writer,top1," << fmt17(rep.writer_top1) << '\n';
    os << "writer,top5," << fmt17(rep.writer_top5) << '\n';
    for (const auto& [metric, value] : rep.aux_metrics)
      os << rep.aux_task << ',' << metric << ',' << fmt17(value) << '\n';
  }
  {
    std::ofstream os(fs::path(dir) / "fusion.csv");
    if (!os) throw StorageError("cannot write fusion.csv");
    os << "n,mean_top1\n";
    for (const auto& [n, v] : rep.fusion_curve) os << n << ',' << fmt17(v) << '\n';
  }
  {
    std::ofstream os(fs::path(dir) / "by_length.csv");
    if (!os) throw StorageError("cannot write by_length.csv");
    os << "length,count,top1,low_support\n";
    for (const auto& [len, b] : rep.per_length)
      os << len << ',' << b.count << ',' << fmt17(b.top1) << ',' << (b.low_support ? 1 : 0)
         << '\n';
  }
  {
    std::ofstream os(fs::path(dir) / "by_char.csv");
    if (!os) throw StorageError("cannot write by_char.csv");
    os << "char,count,top1\n";
    for (const auto& [c, b] : rep.per_char)
      os << c << ',' << b.count << ',' << fmt17(b.top1) << '\n';
  }
}

}  // namespace adnet
