#include "adnet/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "adnet/adam.hpp"
#include "adnet/errors.hpp"

namespace fs = std::filesystem;

namespace adnet {

LossSchedule TrainConfig::effective_schedule() const {
  LossSchedule s;
  s.initial = schedule_initial;
  s.increment = schedule_increment;
  s.cap = schedule_cap;
  s.warmup_iterations = schedule_warmup;
  s.interval = schedule_interval;
  if (s.warmup_iterations == 0) s.warmup_iterations = std::max<std::size_t>(1, iterations / 4);
  if (s.interval == 0) s.interval = std::max<std::size_t>(1, iterations / 8);
  return s;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

struct BatchData {
  Tensor images;
  std::vector<std::size_t> writer_labels;
  std::vector<std::size_t> aux_labels;  // softmax tasks
  Tensor aux_targets;                   // sigmoid tasks
};

BatchData assemble_batch(const LoadedDataset& data, const NetworkConfig& cfg,
                         const std::vector<std::size_t>& idx) {
  const std::size_t b = idx.size();
  const std::size_t hw = data.input_height * data.input_width;
  BatchData out;
  out.images = Tensor::zeros({b, 1, data.input_height, data.input_width});
  out.writer_labels.resize(b);
  const bool sigmoid = cfg.aux.multi_label();
  if (sigmoid) out.aux_targets = Tensor::zeros({b, cfg.aux.width()});
  else out.aux_labels.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& img = data.images[idx[i]];
    std::memcpy(out.images.values.data() + i * hw, img.values.data(),
                hw * sizeof(double));
    const LabelSet& ls = data.labels[idx[i]];
    out.writer_labels[i] = ls.writer_class;
    switch (cfg.aux.kind) {
      case AuxTaskKind::kWordRecognition: out.aux_labels[i] = ls.word_class; break;
      case AuxTaskKind::kWordLength: out.aux_labels[i] = ls.length_class; break;
      case AuxTaskKind::kCharAttributes:
        for (std::size_t j = 0; j < kCharBins; ++j)
          out.aux_targets.values[i * kCharBins + j] = ls.char_attrs[j];
        break;
      case AuxTaskKind::kCombined: {
        const std::size_t w = cfg.aux.width();
        for (std::size_t j = 0; j < w; ++j)
          out.aux_targets.values[i * w + j] = ls.combined_attrs[j];
        break;
      }
    }
  }
  return out;
}

struct LoopState {
  Adam adam;
  RngStream batch_rng{0};
  RngStream dropout_rng{0};
  std::size_t start_iteration = 0;
};

TrainResult run_loop(Network<double>& net, const LoadedDataset& data,
                     const TrainConfig& cfg, const std::string& run_dir,
                     LoopState state) {
  if (data.size() == 0) throw DataError("train: dataset is empty");
  if (cfg.iterations < 1) throw ParameterError("train: iterations must be >= 1");
  if (cfg.batch_size < 1 || cfg.batch_size > data.size())
    throw ParameterError("train: batch size must lie in [1, training set size]");
  if (net.config().input_height != data.input_height ||
      net.config().input_width != data.input_width)
    throw DimensionError("train: dataset resized to " + std::to_string(data.input_height) +
                         "x" + std::to_string(data.input_width) +
                         " but the network expects " +
                         std::to_string(net.config().input_height) + "x" +
                         std::to_string(net.config().input_width));

  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw StorageError("cannot create run dir " + run_dir + ": " + ec.message());

  const LossSchedule schedule = cfg.effective_schedule();
  auto params = net.parameters();
  state.adam.learning_rate = cfg.learning_rate;

  auto checkpoint_extras = [&](std::size_t completed) {
    std::map<std::string, std::string> h;
    h["train.iteration"] = std::to_string(completed);
    h["train.seed"] = std::to_string(cfg.seed);
    h["rng.batch.seed"] = std::to_string(state.batch_rng.seed());
    h["rng.batch.counter"] = std::to_string(state.batch_rng.counter());
    h["rng.dropout.seed"] = std::to_string(state.dropout_rng.seed());
    h["rng.dropout.counter"] = std::to_string(state.dropout_rng.counter());
    h["adam.step"] = std::to_string(state.adam.step);
    h["adam.learning_rate"] = fmt17(state.adam.learning_rate);
    h["adam.beta1"] = fmt17(state.adam.beta1);
    h["adam.beta2"] = fmt17(state.adam.beta2);
    h["adam.epsilon"] = fmt17(state.adam.epsilon);
    return h;
  };
  auto moment_tensors = [&]() {
    NamedTensors extra;
    auto named = net.named_parameters();
    for (std::size_t i = 0; i < named.size(); ++i) {
      extra.emplace_back("opt.m." + named[i].first,
                         Tensor(named[i].second->shape, state.adam.first_moment[i]));
      extra.emplace_back("opt.v." + named[i].first,
                         Tensor(named[i].second->shape, state.adam.second_moment[i]));
    }
    return extra;
  };
  auto write_checkpoint = [&](const std::string& name, std::size_t completed) {
    const std::string path = (fs::path(run_dir) / name).string();
    save_network(path, net, checkpoint_extras(completed), moment_tensors());
    return path;
  };

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> idx(cfg.batch_size);
  for (std::size_t iter = state.start_iteration; iter < cfg.iterations; ++iter) {
    for (auto& i : idx) i = static_cast<std::size_t>(state.batch_rng.below(data.size()));
    BatchData batch = assemble_batch(data, net.config(), idx);
    const double lambda = loss_lambda(iter, schedule);

    Tape tape;
    auto out = net.forward(tape, std::move(batch.images), true, &state.dropout_rng);
    auto writer_loss = tape.softmax_cross_entropy(out.writer_logits, batch.writer_labels);
    Tape::Id aux_loss;
    if (net.config().aux.multi_label())
      aux_loss = tape.sigmoid_binary_cross_entropy(out.aux_logits, std::move(batch.aux_targets));
    else
      aux_loss = tape.softmax_cross_entropy(out.aux_logits, batch.aux_labels);
    auto total = joint_loss(tape, writer_loss, aux_loss, lambda);

    const double loss_writer = tape.value(writer_loss).values[0];
    const double loss_aux = tape.value(aux_loss).values[0];
    const double loss_total = tape.value(total).values[0];
    if (!std::isfinite(loss_total))
      throw DivergenceError("training diverged: non-finite loss at iteration " +
                                std::to_string(iter),
                            iter);

    net.zero_grads();
    tape.backward(total);
    state.adam.update(params);

    if (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      result.log.rows.push_back(
          TrainLogRow{iter, loss_total, loss_writer, loss_aux, lambda, wall});
    }
    if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
        iter + 1 < cfg.iterations)
      write_checkpoint("checkpoint_" + zero_pad(iter + 1, 6), iter + 1);
  }

  result.final_checkpoint = write_checkpoint("checkpoint_final", cfg.iterations);
  result.completed_iterations = cfg.iterations - state.start_iteration;
  save_train_log((fs::path(run_dir) / "train_log.csv").string(), result.log);
  return result;
}

}  // namespace

void save_train_log(const std::string& path, const TrainLog& log) {
  std::ofstream os(path);
  if (!os) throw StorageError("cannot write train log: " + path);
  os << "iteration,loss_total,loss_writer,loss_aux,lambda,wall_time_s\n";
  for (const auto& r : log.rows)
    os << r.iteration << ',' << fmt17(r.loss_total) << ',' << fmt17(r.loss_writer) << ','
       << fmt17(r.loss_aux) << ',' << fmt17(r.lambda) << ',' << fmt17(r.wall_time_s)
       << '\n';
}

TrainResult train(Network<double>& net, const LoadedDataset& data,
                  const TrainConfig& cfg, const std::string& run_dir) {
  LoopState state;
  state.adam.init(net.parameters());
  state.batch_rng = RngStream(cfg.seed).split("batch");
  state.dropout_rng = RngStream(cfg.seed).split("dropout");
  state.start_iteration = 0;
  return run_loop(net, data, cfg, run_dir, std::move(state));
}

ResumeResult resume(const std::string& checkpoint_path, const LoadedDataset& data,
                    const WriterClassMap& writers, const Vocab& vocab,
                    const TrainConfig& cfg, const std::string& run_dir) {
  LoadedNetwork loaded = read_network_file(checkpoint_path);
  if (loaded.config.writer_classes != writers.num_classes())
    throw CheckpointError("resume: checkpoint has " +
                          std::to_string(loaded.config.writer_classes) +
                          " writer classes, dataset has " +
                          std::to_string(writers.num_classes()));
  const bool uses_vocab = loaded.config.aux.kind == AuxTaskKind::kWordRecognition ||
                          loaded.config.aux.kind == AuxTaskKind::kCombined;
  if (uses_vocab && loaded.config.aux.vocab_size != vocab.size())
    throw CheckpointError("resume: checkpoint vocab size " +
                          std::to_string(loaded.config.aux.vocab_size) +
                          " != dataset vocab size " + std::to_string(vocab.size()));

  auto header_u64 = [&](const std::string& key) -> std::uint64_t {
    auto it = loaded.header.find(key);
    if (it == loaded.header.end())
      throw CheckpointError("resume: checkpoint lacks trainer state key " + key);
    return std::stoull(it->second);
  };

  ResumeResult rr{build_network_from(loaded), TrainResult{}};
  LoopState state;
  state.start_iteration = header_u64("train.iteration");
  state.batch_rng = RngStream(header_u64("rng.batch.seed"), header_u64("rng.batch.counter"));
  state.dropout_rng =
      RngStream(header_u64("rng.dropout.seed"), header_u64("rng.dropout.counter"));
  state.adam.init(rr.net.parameters());
  state.adam.step = header_u64("adam.step");
  auto named = rr.net.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const Tensor* m = find_tensor(loaded.tensors, "opt.m." + named[i].first);
    const Tensor* v = find_tensor(loaded.tensors, "opt.v." + named[i].first);
    if (!m || !v)
      throw CheckpointError("resume: checkpoint lacks optimizer state for " +
                            named[i].first);
    if (m->numel() != named[i].second->numel() || v->numel() != named[i].second->numel())
      throw CheckpointError("resume: optimizer state shape mismatch for " + named[i].first);
    state.adam.first_moment[i] = m->values;
    state.adam.second_moment[i] = v->values;
  }

  if (state.start_iteration >= cfg.iterations) {
    rr.result.final_checkpoint = checkpoint_path;
    rr.result.completed_iterations = 0;
    return rr;
  }
  rr.result = run_loop(rr.net, data, cfg, run_dir, std::move(state));
  return rr;
}

}  // namespace adnet
