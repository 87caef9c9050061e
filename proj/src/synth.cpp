#include "dissect/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <tuple>
#include <random>
#include <string>

#include "dissect/errors.hpp"

namespace dissect {

namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_form(const LogicalForm& f, std::uint32_t concept_count) {
  switch (f.kind()) {
    case LogicalForm::Kind::Leaf:
      if (f.concept_id() >= concept_count)
        throw Error(ErrorKind::UnknownConcept,
                    "ground-truth form references unknown concept id " + std::to_string(f.concept_id()));
      return;
    case LogicalForm::Kind::Not: check_form(f.child(), concept_count); return;
    default:
      check_form(f.left(), concept_count);
      check_form(f.right(), concept_count);
  }
}

void draw_rectangle(BitMask& mask, std::mt19937_64& rng) {
  auto f = mask.frame();
  std::uniform_int_distribution<std::size_t> hdist(ceil_div(f.height, 8), ceil_div(f.height, 2));
  std::uniform_int_distribution<std::size_t> wdist(ceil_div(f.width, 8), ceil_div(f.width, 2));
  auto h = std::max<std::size_t>(1, hdist(rng));
  auto w = std::max<std::size_t>(1, wdist(rng));
  std::uniform_int_distribution<std::size_t> rdist(0, f.height - h);
  std::uniform_int_distribution<std::size_t> cdist(0, f.width - w);
  auto r0 = rdist(rng);
  auto c0 = cdist(rng);
  for (auto r = r0; r < r0 + h; ++r)
    for (auto c = c0; c < c0 + w; ++c) mask.set(r, c);
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& what) { return Error(ErrorKind::InvalidSpec, what); };
  if (image_count == 0) throw fail("image_count must be positive");
  if (annotation.height == 0 || annotation.width == 0) throw fail("annotation frame must be positive");
  if (activation.height == 0 || activation.width == 0) throw fail("activation frame must be positive");
  if (activation.height > annotation.height || activation.width > annotation.width)
    throw fail("activation frame must not exceed the annotation frame");
  if (concept_count == 0) throw fail("concept_count must be positive");
  if (!(concept_density >= 0.0 && concept_density <= 1.0)) throw fail("concept_density must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw fail("noise_sigma must be >= 0");
  if (!(activation_gain > 0.0)) throw fail("activation_gain must be > 0");
}

std::pair<ConceptCatalog, AnnotationStore> gen_dataset(const SynthSpec& spec) {
  spec.validate();
  constexpr Category kCategories[] = {Category::Object, Category::Part, Category::Scene, Category::Color};
  ConceptCatalog catalog;
  for (std::uint32_t c = 0; c < spec.concept_count; ++c)
    catalog.add("c" + std::to_string(c), kCategories[c % 4]);

  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution appears(spec.concept_density);
  std::bernoulli_distribution second_blob(0.5);
  AnnotationStore store;
  for (ImageId img = 0; img < spec.image_count; ++img) {
    ImageAnnotation ann;
    ann.frame = spec.annotation;
    for (ConceptId c = 0; c < spec.concept_count; ++c) {
      if (!appears(rng)) continue;
      BitMask mask(spec.annotation);
      draw_rectangle(mask, rng);
      if (second_blob(rng)) draw_rectangle(mask, rng);
      ann.masks.emplace(c, std::move(mask));
    }
    store.images.emplace(img, std::move(ann));
  }
  compute_support(catalog, store);
  return {std::move(catalog), std::move(store)};
}

std::vector<float> block_mean(const BitMask& mask, Frame target) {
  auto src = mask.frame();
  std::vector<float> out(target.pixels());
  for (std::size_t r = 0; r < target.height; ++r) {
    std::size_t r0 = r * src.height / target.height;
    std::size_t r1 = (r + 1) * src.height / target.height;
    for (std::size_t c = 0; c < target.width; ++c) {
      std::size_t c0 = c * src.width / target.width;
      std::size_t c1 = (c + 1) * src.width / target.width;
      std::size_t set = 0;
      for (auto y = r0; y < r1; ++y)
        for (auto x = c0; x < c1; ++x) set += mask.get(y, x) ? 1 : 0;
      out[r * target.width + c] = static_cast<float>(static_cast<double>(set) / static_cast<double>((r1 - r0) * (c1 - c0)));
    }
  }
  return out;
}

ActivationVolume gen_unit(const SynthSpec& spec, const AnnotationStore& store, UnitId unit_id) {
  spec.validate();
  if (!spec.ground_truth) throw Error(ErrorKind::InvalidSpec, "spec has no ground-truth form");
  check_form(*spec.ground_truth, spec.concept_count);

  ActivationVolume vol;
  vol.unit_id = unit_id;
  vol.grid = spec.activation;
  vol.image_ids = store.image_ids();
  vol.values.reserve(vol.image_ids.size() * vol.grid.pixels());
  std::mt19937_64 rng(spec.seed ^ kNoiseStream);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& [id, ann] : store.images) {
    auto g = eval_form(*spec.ground_truth, ann.masks, ann.frame);
    for (float v : block_mean(g, spec.activation)) {
      double a = spec.activation_gain * v;
      if (spec.noise_sigma > 0.0) a += spec.noise_sigma * noise(rng);
      vol.values.push_back(static_cast<float>(a));
    }
  }
  return vol;
}

LogicalForm random_chain_form(std::uint64_t seed, std::uint32_t concept_count, int length,
                              std::span<const Operator> operators) {
  if (length < 1 || static_cast<std::uint32_t>(length) > concept_count || operators.empty())
    throw Error(ErrorKind::InvalidSpec, "cannot build a form of length " + std::to_string(length) + " over " +
                                            std::to_string(concept_count) + " concepts");
  std::mt19937_64 rng(seed);
  std::vector<ConceptId> ids(concept_count);
  for (ConceptId i = 0; i < concept_count; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::uniform_int_distribution<std::size_t> pick_op(0, operators.size() - 1);
  auto form = LogicalForm::leaf(ids[0]);
  for (int k = 1; k < length; ++k) {
    auto leaf = LogicalForm::leaf(ids[static_cast<std::size_t>(k)]);
    switch (operators[pick_op(rng)]) {
      case Operator::And: form = LogicalForm::conjunction(form, leaf); break;
      case Operator::Or: form = LogicalForm::disjunction(form, leaf); break;
      case Operator::AndNot: form = LogicalForm::conjunction(form, LogicalForm::negation(leaf)); break;
      case Operator::OrNot: form = LogicalForm::disjunction(form, LogicalForm::negation(leaf)); break;
    }
  }
  return form;
}

SynthFixture gen_fixture(const SynthSpec& spec, std::uint32_t unit_count, int form_length,
                         std::span<const Operator> operators) {
  SynthFixture fx;
  std::tie(fx.catalog, fx.masks) = gen_dataset(spec);
  fx.activations.grid = spec.activation;
  fx.activations.image_ids = fx.masks.image_ids();
  for (UnitId u = 0; u < unit_count; ++u) {
    SynthSpec unit_spec = spec;
    unit_spec.seed = spec.seed + u + 1;
    if (!unit_spec.ground_truth)
      unit_spec.ground_truth = random_chain_form(unit_spec.seed, spec.concept_count, form_length, operators);
    fx.ground_truth.push_back(*unit_spec.ground_truth);
    fx.activations.units.push_back(gen_unit(unit_spec, fx.masks, u));
  }
  return fx;
}

void save_fixture(const SynthFixture& fixture, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::path root(dir);
  save_masks(fixture.masks, (root / "masks.cexm").string());
  save_activations(fixture.activations, (root / "acts.cexa").string());
  save_catalog(fixture.catalog, (root / "catalog.csv").string());
  std::ofstream gt(root / "ground_truth.csv", std::ios::binary);
  if (!gt) throw Error(ErrorKind::Io, "cannot write ground truth under '" + dir + "'");
  gt << "unit_id,form\n";
  for (std::size_t u = 0; u < fixture.ground_truth.size(); ++u)
    gt << u << ',' << print_form(fixture.ground_truth[u], fixture.catalog) << '\n';
}

}  // namespace dissect
