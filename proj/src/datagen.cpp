#include "adnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "adnet/errors.hpp"
#include "adnet/labels.hpp"

namespace fs = std::filesystem;

namespace adnet {

WriterStyle WriterStyle::derive(std::uint64_t global_seed, std::uint64_t writer_id) {
  RngStream s = RngStream(global_seed).split("style").split(writer_id);
  WriterStyle w;
  w.slant = s.uniform(-0.35, 0.35);
  w.stroke_width = s.uniform(1.0, 3.0);
  w.curvature_gain = s.uniform(0.5, 1.5);
  w.baseline_jitter = s.uniform(0.0, 2.0);
  w.spacing = s.uniform(1.0, 4.0);
  return w;
}

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

double point_segment_distance(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - s.x0) * dx + (py - s.y0) * dy) / len2, 0.0, 1.0);
  const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

constexpr double kGlyphBaseline = 0.25;  // baseline fraction inside the glyph box
constexpr double kLetterHeight = 22.0;   // nominal glyph box height, px
constexpr double kLetterWidth = 13.0;    // advance per letter, px

}  // namespace

Sample render_word(const WriterStyle& style, const std::string& word, RngStream& rng,
                   std::size_t target_h, std::size_t target_w) {
  const std::string letters = normalize_word(word);
  if (letters.empty())
    throw GlyphError("cannot render '" + word + "': no alphabetic characters");

  const double lh = kLetterHeight * style.curvature_gain;
  const double shear = std::tan(style.slant);

  // Transform every glyph point to word coordinates first, then size the
  // canvas from the bounding box.
  std::vector<Segment> segments;
  double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
  double advance = 0.0;
  std::vector<std::array<double, 2>> pts;
  for (std::size_t k = 0; k < letters.size(); ++k) {
    const double jitter = rng.uniform(-style.baseline_jitter, style.baseline_jitter);
    for (const auto& stroke : glyph_strokes(letters[k])) {
      pts.clear();
      for (const auto& [gx, gy] : stroke) {
        // y grows downward on the canvas
        const double y = (1.0 - gy) * lh + jitter;
        const double x = advance + gx * kLetterWidth + shear * (gy - kGlyphBaseline) * lh;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        pts.push_back({x, y});
      }
      if (pts.size() == 1)
        segments.push_back(Segment{pts[0][0], pts[0][1], pts[0][0], pts[0][1]});
      for (std::size_t i = 1; i < pts.size(); ++i)
        segments.push_back(Segment{pts[i - 1][0], pts[i - 1][1], pts[i][0], pts[i][1]});
    }
    advance += kLetterWidth + style.spacing;
  }

  const double margin = style.stroke_width / 2.0 + 2.0;
  const std::size_t canvas_w =
      static_cast<std::size_t>(std::ceil(max_x - min_x + 2 * margin)) + 1;
  const std::size_t canvas_h =
      static_cast<std::size_t>(std::ceil(max_y - min_y + 2 * margin)) + 1;
  const double off_x = margin - min_x, off_y = margin - min_y;

  std::vector<double> ink(canvas_h * canvas_w, 0.0);
  const double half = style.stroke_width / 2.0;
  const double reach = half + 1.5;
  for (const auto& seg : segments) {
    Segment s{seg.x0 + off_x, seg.y0 + off_y, seg.x1 + off_x, seg.y1 + off_y};
    const long x_lo = std::max(0L, static_cast<long>(std::floor(std::min(s.x0, s.x1) - reach)));
    const long x_hi = std::min<long>(canvas_w - 1,
                                     static_cast<long>(std::ceil(std::max(s.x0, s.x1) + reach)));
    const long y_lo = std::max(0L, static_cast<long>(std::floor(std::min(s.y0, s.y1) - reach)));
    const long y_hi = std::min<long>(canvas_h - 1,
                                     static_cast<long>(std::ceil(std::max(s.y0, s.y1) + reach)));
    for (long y = y_lo; y <= y_hi; ++y)
      for (long x = x_lo; x <= x_hi; ++x) {
        const double d = point_segment_distance(x + 0.5, y + 0.5, s);
        const double cov = std::clamp(half + 0.5 - d, 0.0, 1.0);
        double& cell = ink[static_cast<std::size_t>(y) * canvas_w + x];
        cell = std::max(cell, cov);
      }
  }

  Tensor canvas = Tensor::zeros({1, canvas_h, canvas_w});
  for (std::size_t i = 0; i < ink.size(); ++i) canvas.values[i] = 1.0 - ink[i];

  Sample out;
  out.image = resize_bilinear(canvas, target_h, target_w);
  out.word = letters;
  return out;
}

// --- manifests -------------------------------------------------------------

void save_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream os(path);
  if (!os) throw StorageError("cannot write manifest: " + path);
  for (const auto& r : manifest.records)
    os << r.image_path << '\t' << r.writer_id << '\t' << r.word << '\n';
  if (!os) throw StorageError("manifest write failed: " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw StorageError("cannot read manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  Manifest m;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestRecord r;
    if (!std::getline(ss, r.image_path, '\t') || !std::getline(ss, r.writer_id, '\t') ||
        !std::getline(ss, r.word, '\t'))
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected path<TAB>writer<TAB>word");
    if (fs::path(r.image_path).is_relative())
      r.image_path = (base / r.image_path).string();
    if (!seen.insert(r.image_path).second)
      throw DataError(path + ": duplicate image path " + r.image_path);
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw DataError("manifest is empty: " + path);
  return m;
}

// --- corpus ------------------------------------------------------------------

namespace {
std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}
}  // namespace

Manifest generate_corpus(const std::string& out_dir,
                         const std::vector<std::string>& vocab, const CorpusSpec& spec) {
  if (vocab.empty()) throw DataError("generate_corpus: vocabulary is empty");
  if (spec.num_writers == 0 || spec.words_per_writer == 0)
    throw ParameterError("generate_corpus: writers and words per writer must be positive");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw StorageError("cannot create " + out_dir + "/images: " + ec.message());

  std::vector<WriterStyle> styles;
  styles.reserve(spec.num_writers);
  for (std::size_t w = 0; w < spec.num_writers; ++w)
    styles.push_back(WriterStyle::derive(spec.seed, w));
  for (std::size_t a = 0; a < styles.size(); ++a)
    for (std::size_t b = a + 1; b < styles.size(); ++b)
      if (styles[a] == styles[b])
        throw DataError("generate_corpus: writers " + std::to_string(a) + " and " +
                        std::to_string(b) + " drew identical styles");

  const RngStream base(spec.seed);
  Manifest manifest;
  double coverage_sum = 0.0;
  for (std::size_t w = 0; w < spec.num_writers; ++w) {
    const std::string writer_id = "w" + zero_pad(w, 4);
    for (std::size_t k = 0; k < spec.words_per_writer; ++k) {
      const std::size_t idx = w * spec.words_per_writer + k;
      RngStream s = base.split("sample").split(idx);
      const std::string& word = vocab[s.below(vocab.size())];
      Sample sample = render_word(styles[w], word, s, spec.image_height, spec.image_width);
      coverage_sum += ink_coverage(sample.image);
      const std::string rel =
          "images/" + writer_id + "_" + zero_pad(idx, 5) + "_" + sample.word + ".pgm";
      write_pgm((fs::path(out_dir) / rel).string(), sample.image);
      manifest.records.push_back(ManifestRecord{rel, writer_id, sample.word});
    }
  }

  const double mean_coverage = coverage_sum / static_cast<double>(manifest.size());
  if (mean_coverage < 0.05 || mean_coverage > 0.35)
    throw DataError("generate_corpus: mean ink coverage " + std::to_string(mean_coverage) +
                    " outside [0.05, 0.35]; renders look blank or saturated");

  save_manifest((fs::path(out_dir) / "manifest.tsv").string(), manifest);
  return manifest;
}

std::pair<Manifest, Manifest> split_manifest(const Manifest& manifest,
                                             double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ParameterError("split_manifest: train fraction must lie in (0,1)");
  std::map<std::string, std::vector<std::size_t>> by_writer;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    by_writer[manifest.records[i].writer_id].push_back(i);

  Manifest train, test;
  const RngStream base(seed);
  for (auto& [writer, idx] : by_writer) {
    if (idx.size() < 2)
      throw DataError("split_manifest: writer " + writer +
                      " has one sample; cannot appear in both splits");
    RngStream s = base.split("split").split(writer);
    for (std::size_t i = idx.size() - 1; i > 0; --i)
      std::swap(idx[i], idx[s.below(i + 1)]);
    const auto want = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(idx.size())));
    const std::size_t n_train = std::clamp<std::size_t>(want, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? train : test).records.push_back(manifest.records[idx[i]]);
  }
  return {std::move(train), std::move(test)};
}

// --- image IO ------------------------------------------------------------------

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1)
    throw DimensionError("write_pgm: image must be [1,H,W], got " + shape_str(image.shape));
  std::ofstream os(path, std::ios::binary);
  if (!os) throw StorageError("cannot write image: " + path);
  const std::size_t h = image.dim(1), w = image.dim(2);
  os << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double v = std::clamp(image.values[y * w + x], 0.0, 1.0);
      row[x] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(w));
  }
  if (!os) throw StorageError("image write failed: " + path);
}

namespace {

int next_pgm_token(std::istream& is) {
  // skips whitespace and '#' comments, returns a nonnegative integer
  while (true) {
    int c = is.peek();
    if (c == EOF) throw StorageError("pgm: truncated header");
    if (std::isspace(c)) {
      is.get();
      continue;
    }
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
      continue;
    }
    break;
  }
  int value = 0;
  if (!(is >> value) || value < 0) throw StorageError("pgm: malformed header token");
  return value;
}

}  // namespace

Tensor read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StorageError("cannot read image: " + path);
  char m0 = 0, m1 = 0;
  is.get(m0).get(m1);
  const bool binary = (m0 == 'P' && m1 == '5');
  const bool ascii = (m0 == 'P' && m1 == '2');
  if (!binary && !ascii) throw StorageError("not an 8-bit PGM (P5/P2): " + path);
  const int w = next_pgm_token(is);
  const int h = next_pgm_token(is);
  const int maxval = next_pgm_token(is);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw StorageError("pgm: unsupported geometry or depth in " + path);
  Tensor img = Tensor::zeros({1, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  const double scale = 1.0 / static_cast<double>(maxval);
  if (binary) {
    is.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw StorageError("pgm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) img.values[i] = buf[i] * scale;
  } else {
    for (auto& v : img.values) v = next_pgm_token(is) * scale;
  }
  return img;
}

Tensor resize_bilinear(const Tensor& image, std::size_t target_h, std::size_t target_w) {
  if (image.rank() != 3 || image.dim(0) != 1)
    throw DimensionError("resize: image must be [1,H,W]");
  if (target_h == 0 || target_w == 0) throw ParameterError("resize: target size is zero");
  const std::size_t h = image.dim(1), w = image.dim(2);
  Tensor out = Tensor::zeros({1, target_h, target_w});
  const double sy = static_cast<double>(h) / static_cast<double>(target_h);
  const double sx = static_cast<double>(w) / static_cast<double>(target_w);
  for (std::size_t y = 0; y < target_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const double fy0 = std::floor(fy);
    const double wy = fy - fy0;
    const std::size_t y0 = static_cast<std::size_t>(std::clamp<double>(fy0, 0, h - 1));
    const std::size_t y1 = static_cast<std::size_t>(std::clamp<double>(fy0 + 1, 0, h - 1));
    for (std::size_t x = 0; x < target_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const double fx0 = std::floor(fx);
      const double wx = fx - fx0;
      const std::size_t x0 = static_cast<std::size_t>(std::clamp<double>(fx0, 0, w - 1));
      const std::size_t x1 = static_cast<std::size_t>(std::clamp<double>(fx0 + 1, 0, w - 1));
      const double v00 = image.values[y0 * w + x0];
      const double v01 = image.values[y0 * w + x1];
      const double v10 = image.values[y1 * w + x0];
      const double v11 = image.values[y1 * w + x1];
      out.values[y * target_w + x] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                     wy * ((1 - wx) * v10 + wx * v11);
    }
  }
  return out;
}

Tensor load_and_resize(const std::string& path, std::size_t target_h,
                       std::size_t target_w) {
  return resize_bilinear(read_pgm(path), target_h, target_w);
}

double ink_coverage(const Tensor& image) {
  double s = 0.0;
  for (double v : image.values) s += 1.0 - v;
  return s / static_cast<double>(image.numel());
}

}  // namespace adnet
