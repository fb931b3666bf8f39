#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adnet/dataset.hpp"
#include "adnet/labels.hpp"
#include "adnet/network.hpp"

namespace adnet {

struct TrainConfig {
  std::size_t iterations = 2000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  // Loss-weight schedule. Warmup/interval of 0 mean "proportional": 25% and
  // 12.5% of the iteration budget, which reproduces 10,000/5,000 at 40,000.
  double schedule_initial = 0.5;
  double schedule_increment = 0.066;
  double schedule_cap = 0.9;
  std::size_t schedule_warmup = 0;
  std::size_t schedule_interval = 0;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::size_t log_every = 50;

  LossSchedule effective_schedule() const;
};

struct TrainLogRow {
  std::size_t iteration;
  double loss_total;
  double loss_writer;
  double loss_aux;
  double lambda;
  double wall_time_s;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
};

// CSV with header iteration,loss_total,loss_writer,loss_aux,lambda,wall_time_s.
void save_train_log(const std::string& path, const TrainLog& log);

struct TrainResult {
  TrainLog log;
  std::string final_checkpoint;
  std::size_t completed_iterations = 0;
};

// Joint training loop: per iteration, a uniform-with-replacement batch is
// drawn, both losses are computed, combined by the scheduled lambda, and all
// trainable parameters take one Adam step. Deterministic in (net init seed,
// config, dataset). Checkpoints land in run_dir; the final one is always
// written as checkpoint_final.
TrainResult train(Network<double>& net, const LoadedDataset& data,
                  const TrainConfig& config, const std::string& run_dir);

struct ResumeResult {
  Network<double> net;
  TrainResult result;
};

// Continues a run from a trainer checkpoint: parameters, optimizer moments
// and rng stream positions are restored, so an interrupted-and-resumed run is
// bit-identical to an uninterrupted one. A checkpoint at or past the
// configured iteration count returns immediately without touching anything.
ResumeResult resume(const std::string& checkpoint_path, const LoadedDataset& data,
                    const WriterClassMap& writers, const Vocab& vocab,
                    const TrainConfig& config, const std::string& run_dir);

}  // namespace adnet
