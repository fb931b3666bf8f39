#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "adnet/rng.hpp"
#include "adnet/tensor.hpp"

namespace adnet {

// --- glyph skeletons -------------------------------------------------------
// Each lowercase letter is a set of polyline strokes inside a unit box:
// x in [0,1], y in [0,1] with y up, baseline at y=0.25, x-height at 0.75,
// ascenders to 1.0, descenders toward 0.
using GlyphPoint = std::array<double, 2>;
using GlyphStroke = std::vector<GlyphPoint>;

// Throws GlyphError for anything outside [a-z].
const std::vector<GlyphStroke>& glyph_strokes(char letter);

// --- writer styles -----------------------------------------------------------
// The per-writer rendering parameters; all fields are a pure function of
// (global seed, writer id).
struct WriterStyle {
  double slant = 0.0;            // shear angle, radians in [-0.35, 0.35]
  double stroke_width = 1.5;     // pixels in [1, 3]
  double curvature_gain = 1.0;   // vertical glyph scale in [0.5, 1.5]
  double baseline_jitter = 0.5;  // per-letter baseline noise amplitude, [0, 2] px
  double spacing = 2.0;          // advance between letters, [1, 4] px

  static WriterStyle derive(std::uint64_t global_seed, std::uint64_t writer_id);

  bool operator==(const WriterStyle&) const = default;
};

// --- rendering ---------------------------------------------------------------
struct Sample {
  Tensor image;  // [1,H,W], grayscale in [0,1], ink dark on light
  std::string writer_id;
  std::string word;
};

// Renders a word with the writer's style and resizes to target_h x target_w.
// rng drives the per-letter baseline jitter. Throws GlyphError for empty or
// non-alphabetic words.
Sample render_word(const WriterStyle& style, const std::string& word, RngStream& rng,
                   std::size_t target_h, std::size_t target_w);

// --- manifests ---------------------------------------------------------------
// Tab-separated text: image_path <TAB> writer_id <TAB> word, one per line.
struct ManifestRecord {
  std::string image_path;
  std::string writer_id;
  std::string word;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::size_t size() const { return records.size(); }
};

void save_manifest(const std::string& path, const Manifest& manifest);
// Relative image paths are resolved against the manifest's directory.
Manifest load_manifest(const std::string& path);

// --- corpus generation ---------------------------------------------------------
struct CorpusSpec {
  std::size_t num_writers = 50;
  std::size_t words_per_writer = 40;
  std::uint64_t seed = 1;
  std::size_t image_height = 40;
  std::size_t image_width = 120;
};

// Renders the corpus under out_dir/images and returns the manifest (paths
// relative to out_dir). Deterministic in (spec, vocab). Verifies that writer
// styles are pairwise distinct and that mean ink coverage is sane.
Manifest generate_corpus(const std::string& out_dir,
                         const std::vector<std::string>& vocab, const CorpusSpec& spec);

// Per-writer stratified split; every writer keeps at least one sample on
// each side. Throws DataError when a writer has fewer than 2 samples.
std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest,
                                             double train_fraction, std::uint64_t seed);

// --- image IO -------------------------------------------------------------------
// 8-bit binary PGM (P5); ASCII P2 is accepted on read.
void write_pgm(const std::string& path, const Tensor& image);
Tensor read_pgm(const std::string& path);

// Reads a PGM and bilinearly resizes (aspect-ratio stretch) to the target
// size; values scaled to [0,1].
Tensor load_and_resize(const std::string& path, std::size_t target_h,
                       std::size_t target_w);

// Bilinear resize of a [1,H,W] tensor (half-pixel centers, edge clamp).
Tensor resize_bilinear(const Tensor& image, std::size_t target_h, std::size_t target_w);

// Mean of (1 - pixel) over the image: 0 is blank paper, 1 solid ink.
double ink_coverage(const Tensor& image);

}  // namespace adnet
