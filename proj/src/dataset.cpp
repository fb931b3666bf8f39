#include "adnet/dataset.hpp"

#include <algorithm>
#include <set>

#include "adnet/errors.hpp"

namespace adnet {

WriterClassMap WriterClassMap::from_manifest(const Manifest& train) {
  std::set<std::string> unique;
  for (const auto& r : train.records) unique.insert(r.writer_id);
  WriterClassMap m;
  m.ids.assign(unique.begin(), unique.end());
  return m;
}

std::size_t WriterClassMap::at(const std::string& writer_id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), writer_id);
  if (it == ids.end() || *it != writer_id)
    throw DataError("writer '" + writer_id + "' does not appear in the training split");
  return static_cast<std::size_t>(it - ids.begin());
}

LoadedDataset load_dataset(const Manifest& manifest, const WriterClassMap& writers,
                           const Vocab& vocab, std::size_t input_h, std::size_t input_w) {
  LoadedDataset d;
  d.input_height = input_h;
  d.input_width = input_w;
  d.images.reserve(manifest.size());
  d.labels.reserve(manifest.size());
  d.words.reserve(manifest.size());
  for (const auto& r : manifest.records) {
    d.images.push_back(load_and_resize(r.image_path, input_h, input_w));
    d.labels.push_back(derive_labels(r.word, writers.at(r.writer_id), vocab));
    d.words.push_back(normalize_word(r.word));
  }
  return d;
}

}  // namespace adnet
