#pragma once

#include <map>
#include <string>
#include <vector>

#include "adnet/datagen.hpp"
#include "adnet/labels.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// Maps manifest writer ids to contiguous class indices (lexicographic order
// of the training manifest's ids). Test-time lookups of unseen writers fail:
// identification is closed-set.
struct WriterClassMap {
  std::vector<std::string> ids;  // sorted

  static WriterClassMap from_manifest(const Manifest& train);
  std::size_t num_classes() const { return ids.size(); }
  std::size_t at(const std::string& writer_id) const;  // DataError if unknown
};

// Fully materialized dataset: images resized to the network input, labels
// derived once.
struct LoadedDataset {
  std::vector<Tensor> images;  // each [1,H,W]
  std::vector<LabelSet> labels;
  std::vector<std::string> words;  // normalized
  std::size_t input_height = 0;
  std::size_t input_width = 0;

  std::size_t size() const { return images.size(); }
};

LoadedDataset load_dataset(const Manifest& manifest, const WriterClassMap& writers,
                           const Vocab& vocab, std::size_t input_h, std::size_t input_w);

}  // namespace adnet
