#include "hook/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hook/errors.hpp"

namespace hook {

namespace fs = std::filesystem;

void SceneSpec::validate() const {
  if (height <= 0 || width <= 0) throw ContractError("scene spec: non-positive image size");
  if (classes < 1 || classes > 3) throw ContractError("scene spec: classes must be in [1, 3]");
  if (min_objects < 0 || max_objects < min_objects)
    throw ContractError("scene spec: bad object count range");
  if (min_object_size > max_object_size) throw ContractError("scene spec: bad object size range");
  if (seed_size < 1) throw ContractError("scene spec: seed_size must be positive");
  if (height % seed_size != 0 || width % seed_size != 0)
    throw ContractError("scene spec: image extents must divide by seed_size " +
                        std::to_string(seed_size));
  if (max_objects > 0 && min_object_size <= seed_size)
    throw ContractError("scene spec: min object size " + std::to_string(min_object_size) +
                        " must exceed seed_size " + std::to_string(seed_size));
  if (max_objects > 0 && (max_object_size > height || max_object_size > width))
    throw ContractError("scene spec: objects larger than the image");
}

namespace {

// Smooth value noise: random lattice, bilinear interpolation, range [-1, 1].
struct ValueNoise {
  int gh, gw, cell;
  std::vector<double> lattice;

  ValueNoise(RngState& rng, int h, int w, int cell_px) : cell(cell_px) {
    gh = h / cell + 2;
    gw = w / cell + 2;
    lattice.resize(static_cast<size_t>(gh) * gw);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
  }

  double at(int y, int x) const {
    double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
    int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    double ty = fy - y0, tx = fx - x0;
    auto L = [&](int yy, int xx) { return lattice[static_cast<size_t>(yy * gw + xx)]; };
    double top = L(y0, x0) + (L(y0, x0 + 1) - L(y0, x0)) * tx;
    double bot = L(y0 + 1, x0) + (L(y0 + 1, x0 + 1) - L(y0 + 1, x0)) * tx;
    return top + (bot - top) * ty;
  }
};

struct PlacedObject {
  ShapeKind kind;
  MaskImage mask;
  int pixels;
};

// Rasterizes `kind` into a bh×bw bounding box at (y0, x0). Disks use
// radius bh/2 - 0.25; triangles are isoceles with the apex on the top row.
MaskImage rasterize(ShapeKind kind, int y0, int x0, int bh, int bw, int H, int W) {
  MaskImage m{H, W, std::vector<int>(static_cast<size_t>(H) * W, 0)};
  switch (kind) {
    case ShapeKind::Disk: {
      double cy = y0 + (bh - 1) / 2.0, cx = x0 + (bh - 1) / 2.0;
      double r = bh / 2.0 - 0.25;
      for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bh; ++x) {
          double dy = y - cy, dx = x - cx;
          if (dy * dy + dx * dx <= r * r) m.at(y, x) = 1;
        }
      break;
    }
    case ShapeKind::Rectangle: {
      for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) m.at(y, x) = 1;
      break;
    }
    case ShapeKind::Triangle: {
      double cx = x0 + (bw - 1) / 2.0;
      for (int y = y0; y < y0 + bh; ++y) {
        double half = (y - y0 + 1) * 0.5 * bw / bh;
        for (int x = x0; x < x0 + bw; ++x)
          if (std::fabs(x - cx) <= half) m.at(y, x) = 1;
      }
      break;
    }
  }
  return m;
}

// Bounding box sized so the expected pixel area is about size² for every
// kind, keeping the dominant-object label balanced across classes.
void kind_bbox(ShapeKind kind, int size, RngState& rng, int seed_size, int max_side, int& bh,
               int& bw) {
  auto clamp_side = [&](double v) {
    int s = static_cast<int>(std::lround(v));
    return std::clamp(s, seed_size + 1, max_side);
  };
  switch (kind) {
    case ShapeKind::Disk:
      bh = bw = clamp_side(size * 1.1284);  // 2/sqrt(pi)
      break;
    case ShapeKind::Rectangle: {
      double aspect = rng.uniform(0.8, 1.25);
      bh = clamp_side(size * aspect);
      bw = clamp_side(size / aspect);
      break;
    }
    case ShapeKind::Triangle:
      bh = bw = clamp_side(size * 1.4142);
      break;
  }
}

// True if the candidate touches existing occupancy, including diagonal
// adjacency: generated instances keep >= 1 px of background between them.
bool collides(const MaskImage& cand, const std::vector<bool>& occupied, int H, int W) {
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (!cand.at(y, x)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          if (occupied[static_cast<size_t>(ny * W + nx)]) return true;
        }
    }
  return false;
}

const double kClassColor[3][3] = {
    {0.85, 0.25, 0.25},  // disk
    {0.25, 0.80, 0.30},  // rectangle
    {0.25, 0.35, 0.85},  // triangle
};

}  // namespace

LabeledScene generate_scene(RngState& rng, const SceneSpec& spec) {
  spec.validate();
  const int H = spec.height, W = spec.width;

  LabeledScene scene;
  scene.image = Image{H, W, std::vector<double>(static_cast<size_t>(H) * W * 3)};
  scene.segmentation = MaskImage{H, W, std::vector<int>(static_cast<size_t>(H) * W, 0)};

  ValueNoise noise_r(rng, H, W, 8), noise_g(rng, H, W, 8), noise_b(rng, H, W, 8);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      scene.image.at(y, x, 0) = std::clamp(0.50 + spec.texture_amplitude * noise_r.at(y, x), 0.0, 1.0);
      scene.image.at(y, x, 1) = std::clamp(0.50 + spec.texture_amplitude * noise_g.at(y, x), 0.0, 1.0);
      scene.image.at(y, x, 2) = std::clamp(0.50 + spec.texture_amplitude * noise_b.at(y, x), 0.0, 1.0);
    }

  const int n_objects = static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
  std::vector<bool> occupied(static_cast<size_t>(H) * W, false);
  std::vector<PlacedObject> placed;

  for (int i = 0; i < n_objects; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      auto kind = static_cast<ShapeKind>(rng.uniform_int(0, spec.classes - 1));
      int size = static_cast<int>(rng.uniform_int(spec.min_object_size, spec.max_object_size));
      int bh, bw;
      kind_bbox(kind, size, rng, spec.seed_size, std::min(H, W), bh, bw);
      int y0 = static_cast<int>(rng.uniform_int(0, H - bh));
      int x0 = static_cast<int>(rng.uniform_int(0, W - bw));
      MaskImage cand = rasterize(kind, y0, x0, bh, bw, H, W);
      if (collides(cand, occupied, H, W)) continue;

      int pixels = 0;
      double color[3];
      for (int c = 0; c < 3; ++c)
        color[c] = std::clamp(kClassColor[static_cast<int>(kind)][c] +
                                  rng.uniform(-spec.color_jitter, spec.color_jitter),
                              0.0, 1.0);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          if (!cand.at(y, x)) continue;
          ++pixels;
          occupied[static_cast<size_t>(y * W + x)] = true;
          scene.segmentation.at(y, x) = static_cast<int>(kind) + 1;
          scene.image.at(y, x, 0) = std::clamp(color[0] + 0.5 * spec.texture_amplitude * noise_r.at(y, x), 0.0, 1.0);
          scene.image.at(y, x, 1) = std::clamp(color[1] + 0.5 * spec.texture_amplitude * noise_g.at(y, x), 0.0, 1.0);
          scene.image.at(y, x, 2) = std::clamp(color[2] + 0.5 * spec.texture_amplitude * noise_b.at(y, x), 0.0, 1.0);
        }
      placed.push_back({kind, std::move(cand), pixels});
      ok = true;
    }
    if (!ok)
      throw GenerationError("could not place object " + std::to_string(i + 1) + " of " +
                            std::to_string(n_objects) + " after 100 attempts");
  }

  if (placed.empty()) {
    scene.label = spec.background_label();
  } else {
    // dominant shape kind by pixel count; earliest drawn wins ties
    size_t best = 0;
    for (size_t i = 1; i < placed.size(); ++i)
      if (placed[i].pixels > placed[best].pixels) best = i;
    scene.label = static_cast<int>(placed[best].kind);
  }
  for (auto& p : placed) scene.objects.push_back(std::move(p.mask));
  return scene;
}

Manifest write_dataset(const std::string& dir, int count, const SceneSpec& spec, uint64_t seed) {
  spec.validate();
  if (count < 0) throw ContractError("write_dataset: negative count");
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "masks");

  Manifest manifest;
  manifest.root = dir;
  RngState rng(seed);
  std::string csv = "image,label,mask\n";
  char name[32];
  for (int i = 0; i < count; ++i) {
    LabeledScene scene = generate_scene(rng, spec);
    std::snprintf(name, sizeof(name), "%04d", i);
    ManifestRecord rec;
    rec.image_path = std::string("images/") + name + ".ppm";
    rec.mask_path = std::string("masks/") + name + ".pgm";
    rec.label = scene.label;
    write_file((fs::path(dir) / rec.image_path).string(), encode_ppm(scene.image));
    write_file((fs::path(dir) / rec.mask_path).string(), encode_pgm(scene.segmentation));
    csv += rec.image_path + "," + std::to_string(rec.label) + "," + rec.mask_path + "\n";
    manifest.records.push_back(std::move(rec));
  }
  write_file((fs::path(dir) / "manifest.csv").string(), csv);
  return manifest;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest " + path);
  Manifest manifest;
  manifest.root = fs::path(path).parent_path().string();
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "image,label,mask")
        throw ParseError("manifest " + path + " line 1: expected header 'image,label,mask'");
      continue;
    }
    std::istringstream ss(line);
    ManifestRecord rec;
    std::string label_str;
    if (!std::getline(ss, rec.image_path, ',') || !std::getline(ss, label_str, ',') ||
        !std::getline(ss, rec.mask_path))
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) +
                       ": expected 'image,label,mask'");
    try {
      rec.label = std::stoi(label_str);
    } catch (const std::exception&) {
      throw ParseError("manifest " + path + " line " + std::to_string(lineno) + ": bad label '" +
                       label_str + "'");
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

Dataset load_dataset(const std::string& dir) {
  Manifest manifest = load_manifest((fs::path(dir) / "manifest.csv").string());
  Dataset ds;
  for (const auto& rec : manifest.records) {
    LabeledScene scene;
    scene.image = read_ppm((fs::path(manifest.root) / rec.image_path).string());
    scene.segmentation = read_pgm((fs::path(manifest.root) / rec.mask_path).string());
    scene.label = rec.label;
    scene.objects = connected_components(scene.segmentation);
    ds.classify_classes = std::max(ds.classify_classes, scene.label + 1);
    for (int v : scene.segmentation.v) ds.segment_classes = std::max(ds.segment_classes, v + 1);
    ds.scenes.push_back(std::move(scene));
  }
  if (ds.scenes.empty()) throw ContractError("dataset " + dir + " is empty");
  return ds;
}

}  // namespace hook
