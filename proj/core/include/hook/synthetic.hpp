#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hook/image.hpp"
#include "hook/rng.hpp"

namespace hook {

enum class ShapeKind { Disk = 0, Rectangle = 1, Triangle = 2 };

struct SceneSpec {
  int height = 64;
  int width = 64;
  int classes = 3;       // shape kinds drawn from {disk, rectangle, triangle}
  int min_objects = 1;
  int max_objects = 3;
  int min_object_size = 14;  // bounding-box side, pixels
  int max_object_size = 28;
  double texture_amplitude = 0.08;  // background value-noise amplitude
  double color_jitter = 0.10;
  // Largest tokenizer seed size the scenes must support: extents divide by
  // it and every object is strictly larger than one seed window.
  int seed_size = 4;

  void validate() const;
  // Classification label used for scenes with no objects.
  int background_label() const { return classes; }
};

struct LabeledScene {
  Image image;
  int label = 0;            // dominant shape kind; spec.classes when empty
  MaskImage segmentation;   // per-pixel class ids, 0 = background, kind+1 else
  std::vector<MaskImage> objects;  // 0/1 instance masks, pairwise disjoint
};

// Deterministic under (rng, spec). Objects are fully inside the image and
// separated by at least one background pixel, so instances are recoverable
// from the class mask via connected components.
LabeledScene generate_scene(RngState& rng, const SceneSpec& spec);

struct ManifestRecord {
  std::string image_path;  // relative to the dataset directory
  int label = 0;
  std::string mask_path;
};

struct Manifest {
  std::string root;  // dataset directory
  std::vector<ManifestRecord> records;
};

struct Dataset {
  std::vector<LabeledScene> scenes;
  int classify_classes = 0;  // max label + 1
  int segment_classes = 0;   // max mask value + 1
};

// Writes images/NNNN.ppm, masks/NNNN.pgm and manifest.csv under `dir`.
Manifest write_dataset(const std::string& dir, int count, const SceneSpec& spec, uint64_t seed);

Manifest load_manifest(const std::string& path);
Dataset load_dataset(const std::string& dir);

}  // namespace hook
