// adnet: synthetic corpus generation, joint training, evaluation and
// gradient verification for the two-pathway adaptive word-image network.
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "adnet/dataset.hpp"
#include "adnet/datagen.hpp"
#include "adnet/errors.hpp"
#include "adnet/evaluator.hpp"
#include "adnet/gradcheck.hpp"
#include "adnet/labels.hpp"
#include "adnet/network.hpp"
#include "adnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace adnet;

namespace {

// Exit codes, also documented in the README.
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitDivergence = 5;

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

struct TrainSettings {
  std::string data_dir;
  std::string out_dir;
  std::string mode = "baseline";
  std::string aux = "word";
  std::string resume_from;
  std::size_t input_height = 40;
  std::size_t input_width = 120;
  std::string channels = "64,128,256,512";
  std::string fc_widths = "1024,1024";
  std::string adaptive_blocks = "2,3,4";
  double leaky_slope = 0.1;
  double dropout_rate = 0.5;
  std::size_t min_instances = 1;
  std::size_t iterations = 2000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 50;
  double schedule_initial = 0.5;
  double schedule_increment = 0.066;
  double schedule_cap = 0.9;
  std::size_t schedule_warmup = 0;   // 0 = 25% of iterations
  std::size_t schedule_interval = 0; // 0 = 12.5% of iterations
};

std::string default_out_dir(const std::string& tag) {
  const char* root = std::getenv("ADNET_RUN_ROOT");
  if (!root || !*root) return {};
  return (fs::path(root) / tag).string();
}

void require_out_dir(std::string& out_dir, const std::string& tag) {
  if (out_dir.empty()) out_dir = default_out_dir(tag);
  if (out_dir.empty())
    throw ParameterError("--out-dir is required (or set ADNET_RUN_ROOT)");
}

NetworkConfig network_config_from(const TrainSettings& s, std::size_t writer_classes,
                                  std::size_t vocab_size) {
  NetworkConfig cfg;
  cfg.input_height = s.input_height;
  cfg.input_width = s.input_width;
  auto ch = parse_size_list(s.channels);
  auto fw = parse_size_list(s.fc_widths);
  if (ch.size() != 4) throw ParameterError("--channels needs 4 comma-separated values");
  if (fw.size() != 2) throw ParameterError("--fc-widths needs 2 comma-separated values");
  for (int i = 0; i < 4; ++i) cfg.channels[i] = ch[i];
  for (int i = 0; i < 2; ++i) cfg.fc_widths[i] = fw[i];
  cfg.writer_classes = writer_classes;
  cfg.aux = AuxHeadSpec{aux_task_from_string(s.aux), vocab_size};
  cfg.mode = adaptive_mode_from_string(s.mode);
  cfg.adaptive_blocks.clear();
  for (auto b : parse_size_list(s.adaptive_blocks))
    cfg.adaptive_blocks.push_back(static_cast<int>(b));
  std::sort(cfg.adaptive_blocks.begin(), cfg.adaptive_blocks.end());
  cfg.adaptive_blocks.erase(
      std::unique(cfg.adaptive_blocks.begin(), cfg.adaptive_blocks.end()),
      cfg.adaptive_blocks.end());
  cfg.leaky_slope = s.leaky_slope;
  cfg.dropout_rate = s.dropout_rate;
  return cfg;
}

TrainConfig train_config_from(const TrainSettings& s) {
  TrainConfig cfg;
  cfg.iterations = s.iterations;
  cfg.batch_size = s.batch_size;
  cfg.learning_rate = s.learning_rate;
  cfg.seed = s.seed;
  cfg.checkpoint_every = s.checkpoint_every;
  cfg.log_every = s.log_every;
  cfg.schedule_initial = s.schedule_initial;
  cfg.schedule_increment = s.schedule_increment;
  cfg.schedule_cap = s.schedule_cap;
  cfg.schedule_warmup = s.schedule_warmup;
  cfg.schedule_interval = s.schedule_interval;
  return cfg;
}

void write_resolved_config(const std::string& path, const TrainSettings& s) {
  std::ofstream os(path);
  if (!os) throw StorageError("cannot write resolved config: " + path);
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "adaptive-blocks=" << s.adaptive_blocks << '\n';
  os << "aux=" << s.aux << '\n';
  os << "batch-size=" << s.batch_size << '\n';
  os << "channels=" << s.channels << '\n';
  os << "checkpoint-every=" << s.checkpoint_every << '\n';
  os << "data-dir=" << s.data_dir << '\n';
  os << "dropout-rate=" << num(s.dropout_rate) << '\n';
  os << "fc-widths=" << s.fc_widths << '\n';
  os << "input-height=" << s.input_height << '\n';
  os << "input-width=" << s.input_width << '\n';
  os << "iterations=" << s.iterations << '\n';
  os << "leaky-slope=" << num(s.leaky_slope) << '\n';
  os << "learning-rate=" << num(s.learning_rate) << '\n';
  os << "log-every=" << s.log_every << '\n';
  os << "min-instances=" << s.min_instances << '\n';
  os << "mode=" << s.mode << '\n';
  os << "out-dir=" << s.out_dir << '\n';
  os << "schedule-cap=" << num(s.schedule_cap) << '\n';
  os << "schedule-increment=" << num(s.schedule_increment) << '\n';
  os << "schedule-initial=" << num(s.schedule_initial) << '\n';
  os << "schedule-interval=" << s.schedule_interval << '\n';
  os << "schedule-warmup=" << s.schedule_warmup << '\n';
  os << "seed=" << s.seed << '\n';
}

Vocab vocab_from_word_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StorageError("cannot read vocab file: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) words.push_back(line);
  }
  if (words.empty()) throw DataError("vocab file is empty: " + path);
  return build_vocab(words, 1);
}

int cmd_gen_data(std::size_t writers, std::size_t words_per_writer,
                 const std::string& vocab_file, std::string out_dir, std::uint64_t seed,
                 std::size_t height, std::size_t width, double train_fraction) {
  require_out_dir(out_dir, "gen");
  Vocab vocab = vocab_from_word_list(vocab_file);
  CorpusSpec spec;
  spec.num_writers = writers;
  spec.words_per_writer = words_per_writer;
  spec.seed = seed;
  spec.image_height = height;
  spec.image_width = width;
  Manifest manifest = generate_corpus(out_dir, vocab.words, spec);
  auto [train, test] = split_manifest(manifest, train_fraction, seed);
  save_manifest((fs::path(out_dir) / "train.tsv").string(), train);
  save_manifest((fs::path(out_dir) / "test.tsv").string(), test);
  // persist the corpus lexicon: the words that actually occur, across splits
  std::vector<std::string> present;
  present.reserve(manifest.size());
  for (const auto& r : manifest.records) present.push_back(r.word);
  save_vocab((fs::path(out_dir) / "vocab.txt").string(), build_vocab(present, 1));
  std::printf("generated %zu images for %zu writers (%zu train / %zu test) in %s\n",
              manifest.size(), writers, train.size(), test.size(), out_dir.c_str());
  return kExitOk;
}

int cmd_train(TrainSettings s) {
  require_out_dir(s.out_dir, "train-" + s.mode + "-" + s.aux + "-s" + std::to_string(s.seed));
  if (s.data_dir.empty()) throw ParameterError("--data-dir is required");
  Manifest train_manifest = load_manifest((fs::path(s.data_dir) / "train.tsv").string());

  // Prefer the dataset's own lexicon (covers both splits); otherwise derive
  // one from the training words with the instance threshold.
  Vocab vocab;
  const fs::path data_vocab = fs::path(s.data_dir) / "vocab.txt";
  if (fs::exists(data_vocab)) {
    vocab = load_vocab(data_vocab.string());
  } else {
    std::vector<std::string> words;
    words.reserve(train_manifest.size());
    for (const auto& r : train_manifest.records) words.push_back(r.word);
    vocab = build_vocab(words, s.min_instances);
  }
  WriterClassMap writers = WriterClassMap::from_manifest(train_manifest);

  TrainConfig tcfg = train_config_from(s);
  fs::create_directories(s.out_dir);
  write_resolved_config((fs::path(s.out_dir) / "config.resolved").string(), s);
  save_vocab((fs::path(s.out_dir) / "vocab.txt").string(), vocab);

  TrainResult result;
  if (!s.resume_from.empty()) {
    LoadedNetwork peek = read_network_file(s.resume_from);
    LoadedDataset data = load_dataset(train_manifest, writers, vocab,
                                      peek.config.input_height, peek.config.input_width);
    ResumeResult rr = resume(s.resume_from, data, writers, vocab, tcfg, s.out_dir);
    result = std::move(rr.result);
  } else {
    NetworkConfig ncfg = network_config_from(s, writers.num_classes(), vocab.size());
    ncfg.validate();
    LoadedDataset data =
        load_dataset(train_manifest, writers, vocab, ncfg.input_height, ncfg.input_width);
    Network<double> net(ncfg);
    net.init_params(RngStream(s.seed));
    result = train(net, data, tcfg, s.out_dir);
  }
  if (!result.log.rows.empty()) {
    const auto& first = result.log.rows.front();
    const auto& last = result.log.rows.back();
    std::printf("trained %zu iterations: loss_total %.4f -> %.4f (lambda %.3f -> %.3f)\n",
                result.completed_iterations, first.loss_total, last.loss_total,
                first.lambda, last.lambda);
  } else {
    std::printf("nothing to do: checkpoint already at or past %zu iterations\n",
                s.iterations);
  }
  std::printf("final checkpoint: %s\n", result.final_checkpoint.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             std::string out_dir, const std::string& vocab_file,
             const std::string& fuse_n_csv, std::size_t reps, std::uint64_t seed,
             std::size_t batch, bool pre_softmax) {
  require_out_dir(out_dir, "eval");
  LoadedNetwork loaded = read_network_file(checkpoint);
  Network<double> net = build_network_from(loaded);

  std::string vpath = vocab_file;
  if (vpath.empty()) vpath = (fs::path(checkpoint).parent_path() / "vocab.txt").string();
  Vocab vocab = load_vocab(vpath);
  const bool uses_vocab = net.config().aux.kind == AuxTaskKind::kWordRecognition ||
                          net.config().aux.kind == AuxTaskKind::kCombined;
  if (uses_vocab && vocab.size() != net.config().aux.vocab_size)
    throw CheckpointError("vocab size " + std::to_string(vocab.size()) +
                          " does not match checkpoint head " +
                          std::to_string(net.config().aux.vocab_size));

  Manifest train_manifest = load_manifest((fs::path(data_dir) / "train.tsv").string());
  WriterClassMap writers = WriterClassMap::from_manifest(train_manifest);
  if (writers.num_classes() != net.config().writer_classes)
    throw CheckpointError("training split has " + std::to_string(writers.num_classes()) +
                          " writers, checkpoint head expects " +
                          std::to_string(net.config().writer_classes));
  Manifest test_manifest = load_manifest((fs::path(data_dir) / "test.tsv").string());
  LoadedDataset test = load_dataset(test_manifest, writers, vocab,
                                    net.config().input_height, net.config().input_width);

  EvalRequest req;
  req.batch_size = batch;
  req.fuse_n = parse_size_list(fuse_n_csv);
  req.repetitions = reps;
  req.seed = seed;
  req.fuse_pre_softmax = pre_softmax;
  MetricsReport rep = evaluate(net, test, req);
  write_metrics_csvs((fs::path(out_dir) / "metrics").string(), rep);

  std::printf("writer top1 %.4f top5 %.4f over %zu test samples\n", rep.writer_top1,
              rep.writer_top5, test.size());
  for (const auto& [metric, value] : rep.aux_metrics)
    std::printf("aux(%s) %s %.4f\n", rep.aux_task.c_str(), metric.c_str(), value);
  for (const auto& [n, v] : rep.fusion_curve) std::printf("fusion N=%zu top1 %.4f\n", n, v);
  std::printf("metrics written to %s/metrics\n", out_dir.c_str());
  return kExitOk;
}

int cmd_grad_check(double tolerance, std::size_t samples, std::uint64_t seed, bool single) {
  if (single && tolerance < 1e-2) {
    std::fprintf(stderr,
                 "warning: single precision floors finite differences; relaxing "
                 "tolerance from %g to 1e-2\n",
                 tolerance);
    tolerance = 1e-2;
  }
  GradCheckReport report = single ? run_gradient_checks<float>(tolerance, samples, seed)
                                  : run_gradient_checks<double>(tolerance, samples, seed);
  for (const auto& op : report.ops)
    std::printf("%-28s worst_rel_err %.3e  %s\n", op.op.c_str(), op.worst_rel_err,
                op.pass ? "PASS" : "FAIL");
  if (!report.all_pass()) {
    std::fprintf(stderr, "gradient check failed at tolerance %g\n", report.tolerance);
    return kExitInternal;
  }
  std::printf("all gradient checks passed at tolerance %g\n", report.tolerance);
  return kExitOk;
}

int cmd_schedule_dump(std::size_t iterations, const std::string& out, bool scaled,
                      double initial, double increment, double cap, std::size_t warmup,
                      std::size_t interval) {
  LossSchedule s;
  s.initial = initial;
  s.increment = increment;
  s.cap = cap;
  s.warmup_iterations = warmup;
  s.interval = interval;
  if (scaled) s = s.scaled_for(iterations);
  auto points = schedule_points(iterations, s);
  std::ostringstream csv;
  csv << "iteration,lambda\n";
  for (const auto& [iter, lambda] : points) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", lambda);
    csv << iter << ',' << buf << '\n';
  }
  if (out.empty()) {
    std::fputs(csv.str().c_str(), stdout);
  } else {
    std::ofstream os(out);
    if (!os) throw StorageError("cannot write " + out);
    os << csv.str();
    std::printf("schedule written to %s\n", out.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-pathway adaptive network for writer identification from single "
               "word images"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render a synthetic word-image corpus");
  std::size_t gd_writers = 50, gd_words = 40, gd_h = 40, gd_w = 120;
  std::string gd_vocab, gd_out;
  std::uint64_t gd_seed = 1;
  double gd_frac = 0.71;
  gen->add_option("--writers", gd_writers, "number of synthetic writers");
  gen->add_option("--words-per-writer", gd_words, "samples rendered per writer");
  gen->add_option("--vocab-file", gd_vocab, "word list, one word per line")->required();
  gen->add_option("--out-dir", gd_out, "output directory");
  gen->add_option("--seed", gd_seed, "generation seed");
  gen->add_option("--height", gd_h, "stored image height");
  gen->add_option("--width", gd_w, "stored image width");
  gen->add_option("--train-fraction", gd_frac, "per-writer train fraction");

  // train
  auto* tr = app.add_subcommand("train", "train the two-pathway network");
  TrainSettings ts;
  tr->set_config("--config", "", "flat key=value config; flags override")
      ->configurable(false);
  tr->allow_config_extras(false);
  tr->add_option("--data-dir", ts.data_dir, "directory with train.tsv/test.tsv");
  tr->add_option("--out-dir", ts.out_dir, "run directory");
  tr->add_option("--mode", ts.mode, "baseline|linear|deep");
  tr->add_option("--aux", ts.aux, "word|length|chars|combined");
  tr->add_option("--resume", ts.resume_from, "continue from a trainer checkpoint");
  tr->add_option("--input-height", ts.input_height, "network input height");
  tr->add_option("--input-width", ts.input_width, "network input width");
  tr->add_option("--channels", ts.channels, "4 per-block channel counts");
  tr->add_option("--fc-widths", ts.fc_widths, "2 hidden FC widths");
  tr->add_option("--adaptive-blocks", ts.adaptive_blocks, "subset of 2,3,4");
  tr->add_option("--leaky-slope", ts.leaky_slope, "leaky ReLU slope");
  tr->add_option("--dropout-rate", ts.dropout_rate, "dropout after fc1/fc2");
  tr->add_option("--min-instances", ts.min_instances, "vocabulary threshold");
  tr->add_option("--iterations", ts.iterations, "training iterations");
  tr->add_option("--batch-size", ts.batch_size, "minibatch size");
  tr->add_option("--learning-rate", ts.learning_rate, "Adam learning rate");
  tr->add_option("--seed", ts.seed, "master seed (init/batches/dropout)");
  tr->add_option("--checkpoint-every", ts.checkpoint_every, "0 = final only");
  tr->add_option("--log-every", ts.log_every, "log cadence in iterations");
  tr->add_option("--schedule-initial", ts.schedule_initial, "lambda before warmup");
  tr->add_option("--schedule-increment", ts.schedule_increment, "lambda step");
  tr->add_option("--schedule-cap", ts.schedule_cap, "lambda upper bound");
  tr->add_option("--schedule-warmup", ts.schedule_warmup, "0 = 25% of iterations");
  tr->add_option("--schedule-interval", ts.schedule_interval, "0 = 12.5% of iterations");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ev_ckpt, ev_data, ev_out, ev_vocab, ev_fuse = "1,2,3,4,5";
  std::size_t ev_reps = 20, ev_batch = 64;
  std::uint64_t ev_seed = 7;
  bool ev_pre_softmax = false;
  ev->add_option("--checkpoint", ev_ckpt, "network checkpoint")->required();
  ev->add_option("--data-dir", ev_data, "directory with train.tsv/test.tsv")->required();
  ev->add_option("--out-dir", ev_out, "metrics output directory");
  ev->add_option("--vocab-file", ev_vocab, "vocab (default: next to checkpoint)");
  ev->add_option("--fuse-n", ev_fuse, "comma list of fusion sizes");
  ev->add_option("--fuse-reps", ev_reps, "fusion repetitions per writer");
  ev->add_option("--seed", ev_seed, "fusion sampling seed");
  ev->add_option("--batch", ev_batch, "inference batch size");
  ev->add_flag("--pre-softmax-fusion", ev_pre_softmax, "average logits, not probabilities");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient verification");
  double gc_tol = 1e-4;
  std::size_t gc_samples = 20;
  std::uint64_t gc_seed = 1234;
  bool gc_single = false;
  gc->add_option("--tolerance", gc_tol, "max relative error");
  gc->add_option("--samples", gc_samples, "random shapes per op");
  gc->add_option("--seed", gc_seed, "shape/value seed");
  gc->add_flag("--single", gc_single, "run in single precision (tolerance >= 1e-2)");

  // schedule-dump
  auto* sd = app.add_subcommand("schedule-dump", "emit the loss-weight schedule as CSV");
  std::size_t sd_iters = 40000, sd_warmup = 10000, sd_interval = 5000;
  double sd_initial = 0.5, sd_increment = 0.066, sd_cap = 0.9;
  std::string sd_out;
  bool sd_scaled = false;
  sd->add_option("--iterations", sd_iters, "iteration budget")->required();
  sd->add_option("--out", sd_out, "output CSV (default stdout)");
  sd->add_flag("--scaled", sd_scaled, "scale warmup/interval to the budget");
  sd->add_option("--initial", sd_initial, "lambda before warmup");
  sd->add_option("--increment", sd_increment, "lambda step");
  sd->add_option("--cap", sd_cap, "lambda upper bound");
  sd->add_option("--warmup", sd_warmup, "warmup iterations");
  sd->add_option("--interval", sd_interval, "iterations between steps");

  try {
    app.parse(argc, argv);
    if (gen->parsed())
      return cmd_gen_data(gd_writers, gd_words, gd_vocab, gd_out, gd_seed, gd_h, gd_w,
                          gd_frac);
    if (tr->parsed()) return cmd_train(ts);
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_data, ev_out, ev_vocab, ev_fuse, ev_reps, ev_seed,
                      ev_batch, ev_pre_softmax);
    if (gc->parsed()) return cmd_grad_check(gc_tol, gc_samples, gc_seed, gc_single);
    if (sd->parsed())
      return cmd_schedule_dump(sd_iters, sd_out, sd_scaled, sd_initial, sd_increment,
                               sd_cap, sd_warmup, sd_interval);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCheckpoint;
  } catch (const DataError& e) {  // includes storage/glyph/vocabulary errors
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const LabelError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
}
