#include "dissect/datastore.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dissect/errors.hpp"

namespace dissect {

std::vector<ImageId> AnnotationStore::image_ids() const {
  std::vector<ImageId> ids;
  ids.reserve(images.size());
  for (const auto& [id, _] : images) ids.push_back(id);
  return ids;
}

const ActivationVolume& ActivationStore::unit(UnitId id) const {
  if (id >= units.size())
    throw Error(ErrorKind::UnknownUnit, "unknown unit " + std::to_string(id) + " (store has " +
                                            std::to_string(units.size()) + " units)");
  return units[id];
}

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void u16(std::uint16_t v) {
    std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    bytes(b.data(), b.size());
  }
  void u32(std::uint32_t v) {
    std::array<char, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    bytes(b.data(), b.size());
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, const char* what) : in_(in), what_(what) {}

  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw Error(ErrorKind::LengthMismatch, std::string(what_) + " file truncated");
  }
  std::uint16_t u16() {
    std::array<unsigned char, 2> b;
    bytes(reinterpret_cast<char*>(b.data()), b.size());
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    std::array<unsigned char, 4> b;
    bytes(reinterpret_cast<char*>(b.data()), b.size());
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
           (std::uint32_t{b[3]} << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void magic(const char (&expected)[5]) {
    char m[4];
    in_.read(m, 4);
    if (in_.gcount() != 4 || std::memcmp(m, expected, 4) != 0)
      throw Error(ErrorKind::BadMagic, std::string(what_) + " file does not start with magic '" + expected + "'");
  }
  void version() {
    auto v = u16();
    if (v != kFormatVersion)
      throw Error(ErrorKind::VersionUnsupported,
                  std::string(what_) + " version " + std::to_string(v) + " is not supported");
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof())
      throw Error(ErrorKind::LengthMismatch, std::string(what_) + " file has trailing bytes");
  }

 private:
  std::istream& in_;
  const char* what_;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_masks(const AnnotationStore& store, std::ostream& out) {
  Writer w(out);
  w.bytes("CEXM", 4);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(store.images.size()));
  for (const auto& [image_id, image] : store.images) {
    w.u32(image_id);
    w.u16(image.frame.height);
    w.u16(image.frame.width);
    w.u32(static_cast<std::uint32_t>(image.masks.size()));
    for (const auto& [concept_id, mask] : image.masks) {
      if (mask.frame() != image.frame)
        throw Error(ErrorKind::DimensionMismatch, "mask for concept " + std::to_string(concept_id) +
                                                      " on image " + std::to_string(image_id) +
                                                      " does not match the image frame");
      auto runs = rle_encode(mask);
      w.u32(concept_id);
      w.u32(static_cast<std::uint32_t>(runs.size()));
      for (auto r : runs) w.u32(r);
    }
  }
}

AnnotationStore read_masks(std::istream& in) {
  Reader r(in, "CEXM");
  r.magic("CEXM");
  r.version();
  AnnotationStore store;
  auto image_count = r.u32();
  for (std::uint32_t i = 0; i < image_count; ++i) {
    auto image_id = r.u32();
    ImageAnnotation image;
    image.frame.height = r.u16();
    image.frame.width = r.u16();
    auto entries = r.u32();
    for (std::uint32_t e = 0; e < entries; ++e) {
      auto concept_id = r.u32();
      auto run_count = r.u32();
      RleRuns runs;
      for (std::uint32_t k = 0; k < run_count; ++k) runs.push_back(r.u32());
      if (image.masks.count(concept_id))
        throw Error(ErrorKind::ParseError, "image " + std::to_string(image_id) + " repeats concept " +
                                               std::to_string(concept_id));
      image.masks.emplace(concept_id, rle_decode(runs, image.frame));
    }
    if (!store.images.emplace(image_id, std::move(image)).second)
      throw Error(ErrorKind::ParseError, "duplicate image id " + std::to_string(image_id));
  }
  r.expect_end();
  return store;
}

void save_masks(const AnnotationStore& store, const std::string& path) {
  auto out = open_out(path);
  write_masks(store, out);
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

AnnotationStore load_masks(const std::string& path) {
  auto in = open_in(path);
  return read_masks(in);
}

void write_activations(const ActivationStore& store, std::ostream& out) {
  Writer w(out);
  w.bytes("CEXA", 4);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(store.units.size()));
  w.u32(static_cast<std::uint32_t>(store.image_ids.size()));
  w.u16(store.grid.height);
  w.u16(store.grid.width);
  for (auto id : store.image_ids) w.u32(id);
  std::size_t expected = store.image_ids.size() * store.grid.pixels();
  for (const auto& unit : store.units) {
    if (unit.values.size() != expected)
      throw Error(ErrorKind::DimensionMismatch,
                  "unit " + std::to_string(unit.unit_id) + " has " + std::to_string(unit.values.size()) +
                      " values, expected " + std::to_string(expected));
    for (float v : unit.values) w.f32(v);
  }
}

ActivationStore read_activations(std::istream& in) {
  Reader r(in, "CEXA");
  r.magic("CEXA");
  r.version();
  ActivationStore store;
  auto unit_count = r.u32();
  auto image_count = r.u32();
  store.grid.height = r.u16();
  store.grid.width = r.u16();
  for (std::uint32_t i = 0; i < image_count; ++i) {
    auto id = r.u32();
    if (!store.image_ids.empty() && id <= store.image_ids.back())
      throw Error(ErrorKind::ParseError, "CEXA image ids must be strictly ascending");
    store.image_ids.push_back(id);
  }
  std::size_t per_unit = std::size_t{image_count} * store.grid.pixels();
  for (std::uint32_t u = 0; u < unit_count; ++u) {
    ActivationVolume vol;
    vol.unit_id = u;
    vol.grid = store.grid;
    vol.image_ids = store.image_ids;
    for (std::size_t i = 0; i < per_unit; ++i) {
      float v = r.f32();
      if (!std::isfinite(v)) {
        std::size_t image = i / store.grid.pixels();
        throw Error(ErrorKind::NonFiniteValue, "non-finite activation for unit " + std::to_string(u) +
                                                   " on image " + std::to_string(store.image_ids[image]));
      }
      vol.values.push_back(v);
    }
    store.units.push_back(std::move(vol));
  }
  r.expect_end();
  return store;
}

void save_activations(const ActivationStore& store, const std::string& path) {
  auto out = open_out(path);
  write_activations(store, out);
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

ActivationStore load_activations(const std::string& path) {
  auto in = open_in(path);
  return read_activations(in);
}

void check_image_sets(const AnnotationStore& masks, const ActivationStore& acts) {
  if (masks.image_ids() != acts.image_ids)
    throw Error(ErrorKind::ImageSetMismatch,
                "activation store covers " + std::to_string(acts.image_ids.size()) +
                    " images that do not match the " + std::to_string(masks.images.size()) +
                    " annotated images");
}

void compute_support(ConceptCatalog& catalog, const AnnotationStore& store) {
  std::vector<std::uint32_t> support(catalog.size(), 0);
  for (const auto& [image_id, image] : store.images) {
    for (const auto& [concept_id, mask] : image.masks) {
      if (!catalog.contains(concept_id))
        throw Error(ErrorKind::UnknownConcept, "image " + std::to_string(image_id) +
                                                   " annotates unknown concept id " + std::to_string(concept_id));
      if (mask.any()) ++support[concept_id];
    }
  }
  for (ConceptId id = 0; id < catalog.size(); ++id) catalog.at(id).support = support[id];
}

ConceptCatalog filter_concepts(ConceptCatalog catalog, const AnnotationStore& store, std::uint32_t min_samples) {
  compute_support(catalog, store);
  for (ConceptId id = 0; id < catalog.size(); ++id) {
    auto& e = catalog.at(id);
    e.searchable = e.searchable && e.support >= min_samples;
  }
  return catalog;
}

}  // namespace dissect
