#include "adnet/labels.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "adnet/errors.hpp"

namespace adnet {

std::string normalize_word(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c >= 'a' && c <= 'z') out.push_back(c);
    else if (c >= 'A' && c <= 'Z') out.push_back(static_cast<char>(c - 'A' + 'a'));
  }
  return out;
}

std::optional<std::size_t> Vocab::lookup(const std::string& normalized) const {
  auto it = std::lower_bound(words.begin(), words.end(), normalized);
  if (it == words.end() || *it != normalized) return std::nullopt;
  return static_cast<std::size_t>(it - words.begin());
}

Vocab build_vocab(const std::vector<std::string>& words, std::size_t min_instances) {
  if (min_instances < 1) throw ParameterError("build_vocab: min_instances must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& w : words) {
    std::string n = normalize_word(w);
    if (!n.empty()) ++counts[n];
  }
  Vocab v;
  for (const auto& [word, count] : counts)
    if (count >= min_instances) v.words.push_back(word);
  if (v.words.empty())
    throw DataError("build_vocab: no word reaches " + std::to_string(min_instances) +
                    " instances");
  return v;  // std::map iteration is already sorted
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  std::ofstream os(path);
  if (!os) throw StorageError("cannot write vocab: " + path);
  for (const auto& w : vocab.words) os << w << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StorageError("cannot read vocab: " + path);
  Vocab v;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.words.push_back(line);
  }
  if (v.words.empty()) throw DataError("vocab file is empty: " + path);
  if (!std::is_sorted(v.words.begin(), v.words.end()))
    throw DataError("vocab file is not sorted: " + path);
  return v;
}

LabelSet derive_labels(const std::string& word, std::size_t writer_class,
                       const Vocab& vocab) {
  const std::string n = normalize_word(word);
  if (n.empty())
    throw DataError("derive_labels: word '" + word + "' has no alphabetic characters");
  auto word_class = vocab.lookup(n);
  if (!word_class)
    throw VocabularyError("derive_labels: word '" + n + "' is not in the vocabulary");

  LabelSet ls;
  ls.writer_class = writer_class;
  ls.word_class = *word_class;
  ls.length_class = std::min<std::size_t>(n.size(), kWordLengthClasses) - 1;
  for (char c : n) ls.char_attrs[static_cast<std::size_t>(c - 'a')] = 1;

  ls.combined_attrs.assign(kCharBins + kWordLengthClasses + vocab.size(), 0);
  for (std::size_t i = 0; i < kCharBins; ++i) ls.combined_attrs[i] = ls.char_attrs[i];
  ls.combined_attrs[kCharBins + ls.length_class] = 1;
  ls.combined_attrs[kCharBins + kWordLengthClasses + ls.word_class] = 1;
  return ls;
}

LossSchedule LossSchedule::scaled_for(std::size_t iterations) const {
  LossSchedule s = *this;
  s.warmup_iterations = std::max<std::size_t>(1, iterations / 4);
  s.interval = std::max<std::size_t>(1, iterations / 8);
  return s;
}

double loss_lambda(std::size_t iteration, const LossSchedule& s) {
  if (iteration < s.warmup_iterations) return s.initial;
  const std::size_t steps = (iteration - s.warmup_iterations) / s.interval + 1;
  return std::min(s.cap, s.initial + s.increment * static_cast<double>(steps));
}

std::vector<std::pair<std::size_t, double>> schedule_points(std::size_t iterations,
                                                            const LossSchedule& s) {
  if (iterations < 1) throw ParameterError("schedule_points: iterations must be >= 1");
  std::vector<std::pair<std::size_t, double>> out;
  out.emplace_back(0, loss_lambda(0, s));
  for (std::size_t t = s.warmup_iterations; t < iterations; t += s.interval)
    out.emplace_back(t, loss_lambda(t, s));
  return out;
}

double joint_loss(double writer_loss, double aux_loss, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ParameterError("joint_loss: lambda must lie in [0,1], got " +
                         std::to_string(lambda));
  return (1.0 - lambda) * aux_loss + lambda * writer_loss;
}

template <typename Real>
typename TapeT<Real>::Id joint_loss(TapeT<Real>& tape, typename TapeT<Real>::Id writer_loss,
                                    typename TapeT<Real>::Id aux_loss, Real lambda) {
  if (!(lambda >= Real(0) && lambda <= Real(1)))
    throw ParameterError("joint_loss: lambda must lie in [0,1]");
  return tape.blend(aux_loss, writer_loss, Real(1) - lambda, lambda);
}

template TapeT<double>::Id joint_loss<double>(TapeT<double>&, TapeT<double>::Id,
                                              TapeT<double>::Id, double);
template TapeT<float>::Id joint_loss<float>(TapeT<float>&, TapeT<float>::Id,
                                            TapeT<float>::Id, float);

}  // namespace adnet
