// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "dissect/errors.hpp"
#include "dissect/report.hpp"
#include "dissect/search.hpp"
#include "dissect/synth.hpp"
#include "test_support.hpp"

using namespace dissect;
namespace t = dissect::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

const std::vector<Operator> kDefaultOps{Operator::And, Operator::Or, Operator::AndNot};

bool monotone(const BeamState& s) {
  double prev = -1.0;
  for (const auto& [k, best] : s.per_length_best) {
    if (best.iou < prev) return false;
    prev = best.iou;
  }
  return true;
}

// Criterion 5 is checked over the instances of criteria 1 and 4.
std::size_t monotone_checked = 0;
std::size_t monotone_violations = 0;

void note_monotone(const BeamState& s) {
  ++monotone_checked;
  if (!monotone(s)) ++monotone_violations;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  auto start = Clock::now();
  std::mt19937_64 rng(1001);
  int equal = 0;
  const int instances = 100;
  for (int i = 0; i < instances; ++i) {
    std::uint32_t concepts = 2 + static_cast<std::uint32_t>(i % 5);  // 2..6
    int n = 1 + (i % 3);                                             // 1..3
    Frame frame{8, 8};
    auto store = t::random_store(rng, 8, frame, concepts);
    ConceptIndex index(store, concepts);
    UnitMaskVolume unit{0, 0.0, MaskVolume(index.layout())};
    for (std::size_t img = 0; img < 8; ++img) unit.masks.set_image(img, t::random_mask(rng, frame, 0.35));
    std::vector<ConceptId> ids(concepts);
    std::iota(ids.begin(), ids.end(), 0);
    SearchContext ctx(index, unit, ids);

    SearchConfig cfg;
    cfg.max_length = n;
    cfg.beam_size = static_cast<int>(candidate_space_size(concepts, cfg.operators.size(), n));
    auto state = beam_search(ctx, cfg);
    note_monotone(state);
    auto oracle = exhaustive_search(ctx, n, cfg.operators);
    if (state.per_length_best.rbegin()->second.iou == oracle.iou) ++equal;
  }
  double secs = seconds_since(start);
  std::ostringstream d;
  d << equal << "/" << instances << " beam == exhaustive best IoU (exact), " << secs << " s (limit 10 s)";
  return {equal == instances && secs < 10.0, d.str()};
}

Outcome quantile_contract() {
  std::mt19937_64 rng(2002);
  const double q = 0.005;
  int ok = 0;
  const int volumes = 50;
  double worst_low = 1, worst_high = -1;
  for (int v = 0; v < volumes; ++v) {
    std::size_t n = 10000 + static_cast<std::size_t>(v) * 997;
    // Distinct values: a shuffled integer range under a random affine map
    // that stays exact in float.
    std::vector<float> values(n);
    std::uniform_int_distribution<int> offset(-5000, 5000);
    int base = offset(rng);
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(base + static_cast<int>(i)) * 0.25f;
    std::shuffle(values.begin(), values.end(), rng);
    double tu = compute_threshold(values, q);
    auto above = std::count_if(values.begin(), values.end(), [&](float x) { return x > tu; });
    double frac = static_cast<double>(above) / static_cast<double>(n);
    double low = q - 1.0 / static_cast<double>(n);
    worst_low = std::min(worst_low, frac - low);
    worst_high = std::max(worst_high, frac - q);
    if (frac >= low && frac <= q) ++ok;
  }
  std::ostringstream d;
  d << ok << "/" << volumes << " volumes with strict-greater fraction in [q - 1/N, q]"
    << " (min margin below " << worst_low << ", max excess " << worst_high << ")";
  return {ok == volumes, d.str()};
}

Outcome score_oracles() {
  std::mt19937_64 rng(3003);
  int ok = 0;
  const int instances = 200;
  double worst = 0;
  for (int i = 0; i < instances; ++i) {
    Frame frame = t::random_frame(rng, 10);
    std::uint32_t images = 1 + static_cast<std::uint32_t>(rng() % 5);
    std::uint32_t concepts = 1 + static_cast<std::uint32_t>(rng() % 5);
    auto store = t::random_store(rng, images, frame, concepts, 0.6);
    ConceptIndex index(store, concepts);
    UnitMaskVolume unit{0, 0.0, MaskVolume(index.layout())};
    std::vector<BitMask> unit_masks;
    for (std::size_t img = 0; img < images; ++img) {
      unit_masks.push_back(t::random_mask(rng, frame, 0.1 + 0.8 * (static_cast<double>(rng() % 100) / 100.0)));
      unit.masks.set_image(img, unit_masks.back());
    }
    auto form = t::random_form(rng, concepts, 1 + static_cast<int>(rng() % 4));
    auto naive = t::naive_scores(unit_masks, form, store);

    auto rel = [](double got, double want) {
      if (got == want) return 0.0;
      return std::fabs(got - want) / std::max(std::fabs(want), std::numeric_limits<double>::min());
    };
    double want_iou = naive.uni == 0 ? 0.0 : static_cast<double>(naive.inter) / static_cast<double>(naive.uni);
    double e1 = rel(iou_score(unit, form, index), want_iou);
    auto d = detacc_score(unit, form, index);
    bool support_ok = d.has_value() == (naive.present > 0);
    double e2 = 0;
    if (d && naive.present > 0)
      e2 = rel(*d, static_cast<double>(naive.detected) / static_cast<double>(naive.present));
    worst = std::max({worst, e1, e2});
    if (support_ok && e1 <= 1e-12 && e2 <= 1e-12) ++ok;
  }
  std::ostringstream d;
  d << ok << "/" << instances << " match the per-pixel interpreter (max rel err " << worst << ", tol 1e-12)";
  return {ok == instances, d.str()};
}

// Closed-loop fixture: activations at annotation resolution so a clean unit's
// binarized mask is exactly the ground-truth mask.
SynthSpec closed_loop_spec(std::uint64_t seed, int length, double sigma) {
  SynthSpec spec;
  spec.seed = seed;
  spec.image_count = 32;
  spec.annotation = Frame{16, 16};
  spec.activation = Frame{16, 16};
  spec.concept_count = 8;
  spec.concept_density = 0.5;
  spec.noise_sigma = sigma;
  spec.ground_truth = random_chain_form(seed * 7919 + 1, spec.concept_count, length, kDefaultOps);
  return spec;
}

// Ground truth covers more than the quantile of all pixels and every
// concept it uses survives the min-sample filter.
bool usable_fixture(const SynthSpec& spec, const ConceptCatalog& catalog, const AnnotationStore& store) {
  std::size_t covered = 0, total = 0;
  for (const auto& [id, ann] : store.images) {
    covered += eval_form(*spec.ground_truth, ann.masks, ann.frame).popcount();
    total += ann.frame.pixels();
  }
  if (static_cast<double>(covered) <= kDefaultQuantile * static_cast<double>(total) + 1) return false;
  std::function<bool(const LogicalForm&)> supported = [&](const LogicalForm& f) {
    switch (f.kind()) {
      case LogicalForm::Kind::Leaf: return catalog.at(f.concept_id()).searchable;
      case LogicalForm::Kind::Not: return supported(f.child());
      default: return supported(f.left()) && supported(f.right());
    }
  };
  return supported(*spec.ground_truth);
}

struct LoopResult {
  double best_iou;
  BeamState state;
};

LoopResult run_closed_loop(const SynthSpec& spec) {
  auto [catalog, store] = gen_dataset(spec);
  catalog = filter_concepts(std::move(catalog), store);
  auto acts = gen_unit(spec, store);
  ConceptIndex index(store, catalog.size());
  auto unit = build_unit_masks(acts, index.layout());
  SearchContext ctx(index, unit, catalog.searchable_ids());
  // A beam holding every form of length n - 1 cannot prune the prefix of a
  // length-n ground truth.
  SearchConfig cfg;
  cfg.beam_size = static_cast<int>(candidate_space_size(ctx.concepts().size(), cfg.operators.size(), cfg.max_length - 1));
  auto state = beam_search(ctx, cfg);
  return {state.per_length_best.rbegin()->second.iou, std::move(state)};
}

// Draws the next usable seed for a given length.
std::uint64_t next_usable_seed(std::uint64_t& cursor, int length) {
  for (;;) {
    auto seed = cursor++;
    auto spec = closed_loop_spec(seed, length, 0.0);
    auto [catalog, store] = gen_dataset(spec);
    catalog = filter_concepts(std::move(catalog), store);
    if (usable_fixture(spec, catalog, store)) return seed;
  }
}

Outcome closed_loop_recovery() {
  std::uint64_t cursor = 40000;
  int perfect = 0;
  const int specs = 100;
  for (int i = 0; i < specs; ++i) {
    int length = 1 + i % 3;
    auto seed = next_usable_seed(cursor, length);
    auto r = run_closed_loop(closed_loop_spec(seed, length, 0.0));
    note_monotone(r.state);
    if (r.best_iou == 1.0) ++perfect;
  }

  const double sigmas[] = {0.0, 0.1, 0.5, 1.0};
  const int seeds = 20;
  std::vector<std::uint64_t> picked;
  std::vector<int> lengths;
  cursor = 90000;
  for (int s = 0; s < seeds; ++s) {
    lengths.push_back(1 + s % 3);
    picked.push_back(next_usable_seed(cursor, lengths.back()));
  }
  std::vector<double> means;
  for (double sigma : sigmas) {
    double sum = 0;
    for (int s = 0; s < seeds; ++s) {
      auto r = run_closed_loop(closed_loop_spec(picked[static_cast<std::size_t>(s)], lengths[static_cast<std::size_t>(s)], sigma));
      note_monotone(r.state);
      sum += r.best_iou;
    }
    means.push_back(sum / seeds);
  }
  bool non_increasing = true;
  for (std::size_t i = 1; i < means.size(); ++i) non_increasing = non_increasing && means[i] <= means[i - 1];

  std::ostringstream d;
  d << perfect << "/" << specs << " clean specs reach IoU 1.0 (need >= 95); mean best IoU by sigma {0,0.1,0.5,1}: ";
  for (std::size_t i = 0; i < means.size(); ++i) d << (i ? ", " : "") << means[i];
  d << (non_increasing ? " (non-increasing)" : " (NOT non-increasing)");
  return {perfect >= 95 && non_increasing, d.str()};
}

Outcome beam_monotonicity() {
  std::ostringstream d;
  d << monotone_violations << " violations over " << monotone_checked << " beam runs from criteria 1 and 4";
  return {monotone_violations == 0 && monotone_checked > 0, d.str()};
}

Outcome mask_laws() {
  std::mt19937_64 rng(6006);
  const int masks = 1000;
  int de_morgan = 0, idempotent = 0, incl_excl = 0, rle = 0;
  for (int i = 0; i < masks; ++i) {
    auto f = t::random_frame(rng, 48);
    std::uniform_real_distribution<double> density(0.0, 1.0);
    auto a = t::random_mask(rng, f, density(rng));
    auto b = t::random_mask(rng, f, density(rng));
    if (mask_not(mask_and(a, b)) == mask_or(mask_not(a), mask_not(b))) ++de_morgan;
    if (mask_and(a, a) == a && mask_or(a, a) == a) ++idempotent;
    if (popcount(mask_and(a, b)) + popcount(mask_or(a, b)) == popcount(a) + popcount(b)) ++incl_excl;
    if (rle_decode(rle_encode(a), f) == a) ++rle;
  }
  std::ostringstream d;
  d << "De Morgan " << de_morgan << ", idempotence " << idempotent << ", inclusion-exclusion " << incl_excl
    << ", RLE round-trip " << rle << " of " << masks << " random masks";
  return {de_morgan == masks && idempotent == masks && incl_excl == masks && rle == masks, d.str()};
}

template <typename Fn>
std::optional<ErrorKind> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

Outcome format_round_trips() {
  std::mt19937_64 rng(7007);
  int round_trips = 0, corruptions = 0, expected_corruptions = 0;
  std::vector<std::string> problems;
  auto expect = [&](const std::string& what, std::optional<ErrorKind> got, ErrorKind want) {
    ++expected_corruptions;
    if (got == want)
      ++corruptions;
    else
      problems.push_back(what);
  };

  const int trials = 50;
  for (int i = 0; i < trials; ++i) {
    // catalog
    ConceptCatalog cat;
    std::uint32_t n = 1 + static_cast<std::uint32_t>(rng() % 20);
    for (std::uint32_t c = 0; c < n; ++c)
      cat.add("k" + std::to_string(rng() % 1000) + "_" + std::to_string(c), static_cast<Category>(rng() % 5));
    std::ostringstream cat_out;
    write_catalog(cat, cat_out);
    std::istringstream cat_in(cat_out.str());
    bool cat_ok = read_catalog(cat_in) == cat;

    // masks
    auto store = t::random_store(rng, 1 + static_cast<std::uint32_t>(rng() % 8), t::random_frame(rng, 24), n);
    std::ostringstream m_out;
    write_masks(store, m_out);
    std::istringstream m_in(m_out.str());
    bool masks_ok = read_masks(m_in) == store;

    // activations
    ActivationStore acts;
    acts.grid = t::random_frame(rng, 6);
    acts.image_ids = store.image_ids();
    std::normal_distribution<float> g(0, 2);
    for (UnitId u = 0; u < 1 + rng() % 5; ++u) {
      ActivationVolume v{u, acts.grid, acts.image_ids, std::vector<float>(acts.image_ids.size() * acts.grid.pixels())};
      for (auto& x : v.values) x = g(rng);
      acts.units.push_back(std::move(v));
    }
    std::ostringstream a_out;
    write_activations(acts, a_out);
    std::istringstream a_in(a_out.str());
    bool acts_ok = read_activations(a_in) == acts;
    if (cat_ok && masks_ok && acts_ok) ++round_trips;

    // corruptions
    auto mbytes = m_out.str();
    auto abytes = a_out.str();
    std::uniform_int_distribution<std::size_t> cut_m(6, mbytes.size() - 1);
    std::uniform_int_distribution<std::size_t> cut_a(6, abytes.size() - 1);
    expect("truncated CEXM", error_of([&] {
             std::istringstream in(mbytes.substr(0, cut_m(rng)));
             read_masks(in);
           }),
           ErrorKind::LengthMismatch);
    expect("truncated CEXA", error_of([&] {
             std::istringstream in(abytes.substr(0, cut_a(rng)));
             read_activations(in);
           }),
           ErrorKind::LengthMismatch);
    auto bad = mbytes;
    bad[rng() % 4] ^= 0x20;
    expect("CEXM magic", error_of([&] {
             std::istringstream in(bad);
             read_masks(in);
           }),
           ErrorKind::BadMagic);
    bad = abytes;
    bad[4] = static_cast<char>(2 + rng() % 200);
    expect("CEXA version", error_of([&] {
             std::istringstream in(bad);
             read_activations(in);
           }),
           ErrorKind::VersionUnsupported);
    bad = abytes;
    {
      // overwrite one f32 with NaN
      std::size_t header = 4 + 2 + 4 + 4 + 2 + 2 + 4 * acts.image_ids.size();
      std::size_t count = (abytes.size() - header) / 4;
      std::size_t at = header + 4 * (rng() % count);
      const unsigned char nan_bytes[] = {0x00, 0x00, 0xc0, 0x7f};
      for (int k = 0; k < 4; ++k) bad[at + k] = static_cast<char>(nan_bytes[k]);
    }
    expect("CEXA NaN", error_of([&] {
             std::istringstream in(bad);
             read_activations(in);
           }),
           ErrorKind::NonFiniteValue);
    auto cat_text = cat_out.str();
    expect("catalog duplicate", error_of([&] {
             std::istringstream in(cat_text + std::to_string(n) + "," + cat.name(0) + ",object\n");
             read_catalog(in);
           }),
           ErrorKind::DuplicateName);
    expect("catalog category", error_of([&] {
             std::istringstream in(cat_text + std::to_string(n) + ",zz_new,vehicle\n");
             read_catalog(in);
           }),
           ErrorKind::ParseError);
    expect("catalog ids", error_of([&] {
             std::istringstream in(cat_text + std::to_string(n + 1) + ",zz_new,object\n");
             read_catalog(in);
           }),
           ErrorKind::NonDenseIds);
  }
  std::ostringstream d;
  d << round_trips << "/" << trials << " randomized catalog+mask+activation round trips; " << corruptions << "/"
    << expected_corruptions << " corruptions raised the specified error";
  if (!problems.empty()) d << " (first miss: " << problems.front() << ")";
  return {round_trips == trials && corruptions == expected_corruptions, d.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  auto dir = fs::temp_directory_path() / ("dissect_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  SynthSpec spec;
  spec.seed = 8008;
  spec.image_count = 40;
  spec.annotation = Frame{32, 32};
  spec.activation = Frame{8, 8};
  spec.concept_count = 20;
  spec.concept_density = 0.4;
  spec.noise_sigma = 0.2;
  save_fixture(gen_fixture(spec, 16, 2, kDefaultOps), (dir / "fx").string());

  auto run = [&](const std::string& out, unsigned jobs) {
    std::string cmd = std::string("\"") + DISSECT_CLI_PATH + "\" dissect --masks " + (dir / "fx/masks.cexm").string() +
                      " --acts " + (dir / "fx/acts.cexa").string() + " --catalog " +
                      (dir / "fx/catalog.csv").string() + " --select detacc --stop detacc-drop --jobs " +
                      std::to_string(jobs) + " --out " + (dir / out).string();
    int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) && WEXITSTATUS(raw) == 0;
  };
  bool ran = run("a.json", 1) && run("b.json", 1) && run("c.json", 2) && run("d.json", 4) && run("e.json", 8);
  std::string a = slurp(dir / "a.json");
  bool same = ran && !a.empty();
  for (const char* other : {"b.json", "c.json", "d.json", "e.json"}) same = same && slurp(dir / other) == a;
  std::size_t units = 0;
  if (ran) {
    try {
      units = reports_from_json(a).size();
    } catch (const Error&) {
    }
  }
  fs::remove_all(dir);
  std::ostringstream d;
  d << "CLI reports over 16 units " << (same ? "byte-identical" : "DIFFER") << " across 2 runs and --jobs {1,2,4,8} ("
    << a.size() << " bytes, " << units << " units)";
  return {same && units == 16, d.str()};
}

Outcome performance() {
  SynthSpec spec;
  spec.seed = 9009;
  spec.image_count = 200;
  spec.annotation = Frame{112, 112};
  spec.activation = Frame{7, 7};
  spec.concept_count = 100;
  spec.concept_density = 0.3;
  spec.noise_sigma = 0.1;
  auto fx = gen_fixture(spec, 64, 3, kDefaultOps);
  DissectInputs inputs;
  inputs.masks = std::move(fx.masks);
  inputs.activations = std::move(fx.activations);
  inputs.catalog = filter_concepts(std::move(fx.catalog), inputs.masks);

  DissectOptions opts;  // B = 10, n = 3
  opts.jobs = 1;
  auto start = Clock::now();
  auto reports = dissect_all(inputs, opts);
  double secs = seconds_since(start);
  std::ostringstream d;
  d << reports.size() << " units x 200 images @112x112, 100 concepts, B=10, n=3 in " << secs
    << " s single-threaded (limit 60 s)";
  return {reports.size() == 64 && secs < 60.0, d.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "oracle equivalence", oracle_equivalence},
      {2, "quantile contract", quantile_contract},
      {3, "score formula oracles", score_oracles},
      {4, "closed-loop recovery", closed_loop_recovery},
      {5, "beam monotonicity", beam_monotonicity},
      {6, "mask algebra laws", mask_laws},
      {7, "format round-trips", format_round_trips},
      {8, "determinism", determinism},
      {9, "performance", performance},
  };
  for (const auto& c : criteria) {
    try {
      report(c.id, c.name, c.run());
    } catch (const std::exception& e) {
      report(c.id, c.name, Outcome{false, std::string("exception: ") + e.what()});
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
