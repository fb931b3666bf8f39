#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adnet/network.hpp"
#include "adnet/tape.hpp"

namespace adnet {

// Lower-cases ASCII letters and strips every non-letter character.
std::string normalize_word(const std::string& raw);

// Word class vocabulary with stable, lexicographically sorted indices.
struct Vocab {
  std::vector<std::string> words;  // sorted, unique, normalized

  std::size_t size() const { return words.size(); }
  std::optional<std::size_t> lookup(const std::string& normalized) const;
};

// Keeps the distinct normalized words with at least min_instances
// occurrences. Words that normalize to nothing are dropped.
Vocab build_vocab(const std::vector<std::string>& words, std::size_t min_instances);

// One word per line, sorted.
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

// All derived labels for one sample.
struct LabelSet {
  std::size_t writer_class = 0;
  std::size_t word_class = 0;
  std::size_t length_class = 0;                  // min(letters, 13) - 1
  std::array<std::uint8_t, kCharBins> char_attrs{};  // presence bits, case-folded
  std::vector<std::uint8_t> combined_attrs;      // [26 chars | 13 length | vocab]
};

LabelSet derive_labels(const std::string& word, std::size_t writer_class,
                       const Vocab& vocab);

// Iteration-dependent trade-off weight between the auxiliary and the main
// loss: the initial value holds through the warmup, then grows by a fixed
// increment at every interval, clipped at the cap.
struct LossSchedule {
  double initial = 0.5;
  std::size_t warmup_iterations = 10000;
  double increment = 0.066;
  std::size_t interval = 5000;
  double cap = 0.9;

  // Desk-scale variant: warmup becomes 25% of the total iteration budget and
  // the interval 12.5%, preserving the 10,000/5,000-of-40,000 proportions.
  LossSchedule scaled_for(std::size_t iterations) const;
};

double loss_lambda(std::size_t iteration, const LossSchedule& schedule);

// (iteration, lambda) at iteration 0 and at every increment boundary below
// the iteration budget.
std::vector<std::pair<std::size_t, double>> schedule_points(std::size_t iterations,
                                                            const LossSchedule& schedule);

// (1 - lambda) * aux + lambda * writer. lambda must lie in [0,1].
double joint_loss(double writer_loss, double aux_loss, double lambda);

template <typename Real>
typename TapeT<Real>::Id joint_loss(TapeT<Real>& tape, typename TapeT<Real>::Id writer_loss,
                                    typename TapeT<Real>::Id aux_loss, Real lambda);

}  // namespace adnet
