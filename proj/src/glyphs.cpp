#include <cmath>
#include <map>

#include "adnet/datagen.hpp"
#include "adnet/errors.hpp"

namespace adnet {
namespace {

constexpr double kPi = 3.14159265358979323846;

GlyphStroke arc(double cx, double cy, double rx, double ry, double deg0, double deg1,
                int segments = 14) {
  GlyphStroke s;
  s.reserve(segments + 1);
  for (int i = 0; i <= segments; ++i) {
    const double a = (deg0 + (deg1 - deg0) * i / segments) * kPi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

GlyphStroke circle(double cx, double cy, double rx, double ry) {
  return arc(cx, cy, rx, ry, 90.0, 450.0, 20);
}

std::map<char, std::vector<GlyphStroke>> make_glyphs() {
  std::map<char, std::vector<GlyphStroke>> g;
  g['a'] = {circle(0.42, 0.50, 0.22, 0.25), {{0.64, 0.75}, {0.64, 0.25}}};
  g['b'] = {{{0.30, 1.00}, {0.30, 0.25}}, circle(0.52, 0.50, 0.22, 0.25)};
  g['c'] = {arc(0.50, 0.50, 0.26, 0.25, 50, 310)};
  g['d'] = {{{0.70, 1.00}, {0.70, 0.25}}, circle(0.48, 0.50, 0.22, 0.25)};
  g['e'] = {{{0.24, 0.52}, {0.74, 0.52}}, arc(0.49, 0.50, 0.25, 0.25, 5, 320)};
  g['f'] = {{{0.66, 0.95}, {0.50, 0.95}, {0.42, 0.85}, {0.42, 0.25}},
            {{0.25, 0.75}, {0.66, 0.75}}};
  g['g'] = {circle(0.45, 0.52, 0.20, 0.22),
            {{0.65, 0.75}, {0.65, 0.12}, {0.52, 0.02}, {0.35, 0.05}}};
  g['h'] = {{{0.28, 1.00}, {0.28, 0.25}},
            {{0.28, 0.52}, {0.36, 0.68}, {0.52, 0.73}, {0.64, 0.66}, {0.68, 0.50},
             {0.68, 0.25}}};
  g['i'] = {{{0.50, 0.75}, {0.50, 0.25}}, {{0.50, 0.88}, {0.50, 0.92}}};
  g['j'] = {{{0.58, 0.75}, {0.58, 0.12}, {0.47, 0.02}, {0.34, 0.06}},
            {{0.58, 0.88}, {0.58, 0.92}}};
  g['k'] = {{{0.28, 1.00}, {0.28, 0.25}}, {{0.66, 0.72}, {0.30, 0.46}},
            {{0.42, 0.55}, {0.68, 0.25}}};
  g['l'] = {{{0.50, 1.00}, {0.50, 0.25}}};
  g['m'] = {{{0.18, 0.75}, {0.18, 0.25}},
            {{0.18, 0.55}, {0.25, 0.70}, {0.35, 0.72}, {0.44, 0.60}, {0.46, 0.25}},
            {{0.46, 0.55}, {0.53, 0.70}, {0.63, 0.72}, {0.72, 0.60}, {0.74, 0.25}}};
  g['n'] = {{{0.28, 0.75}, {0.28, 0.25}},
            {{0.28, 0.55}, {0.37, 0.71}, {0.52, 0.73}, {0.64, 0.62}, {0.66, 0.25}}};
  g['o'] = {circle(0.50, 0.50, 0.25, 0.25)};
  g['p'] = {{{0.28, 0.75}, {0.28, 0.00}}, circle(0.52, 0.50, 0.22, 0.24)};
  g['q'] = {circle(0.46, 0.50, 0.22, 0.24), {{0.68, 0.75}, {0.68, 0.00}}};
  g['r'] = {{{0.30, 0.75}, {0.30, 0.25}},
            {{0.30, 0.58}, {0.40, 0.71}, {0.55, 0.74}, {0.66, 0.68}}};
  g['s'] = {{{0.68, 0.68}, {0.55, 0.74}, {0.38, 0.72}, {0.30, 0.62}, {0.38, 0.52},
             {0.58, 0.48}, {0.66, 0.38}, {0.58, 0.28}, {0.40, 0.26}, {0.28, 0.32}}};
  g['t'] = {{{0.45, 0.92}, {0.45, 0.32}, {0.52, 0.26}, {0.64, 0.28}},
            {{0.26, 0.75}, {0.68, 0.75}}};
  g['u'] = {{{0.28, 0.75}, {0.28, 0.38}, {0.36, 0.27}, {0.50, 0.25}, {0.62, 0.32},
             {0.66, 0.45}},
            {{0.66, 0.75}, {0.66, 0.25}}};
  g['v'] = {{{0.24, 0.75}, {0.47, 0.25}, {0.70, 0.75}}};
  g['w'] = {{{0.16, 0.75}, {0.30, 0.25}, {0.45, 0.60}, {0.60, 0.25}, {0.74, 0.75}}};
  g['x'] = {{{0.26, 0.75}, {0.70, 0.25}}, {{0.70, 0.75}, {0.26, 0.25}}};
  g['y'] = {{{0.26, 0.75}, {0.48, 0.30}}, {{0.70, 0.75}, {0.38, 0.08}, {0.28, 0.03}}};
  g['z'] = {{{0.26, 0.75}, {0.68, 0.75}, {0.26, 0.25}, {0.70, 0.25}}};
  return g;
}

}  // namespace

const std::vector<GlyphStroke>& glyph_strokes(char letter) {
  static const std::map<char, std::vector<GlyphStroke>> glyphs = make_glyphs();
  auto it = glyphs.find(letter);
  if (it == glyphs.end())
    throw GlyphError(std::string("no glyph template for character '") + letter + "'");
  return it->second;
}

}  // namespace adnet
