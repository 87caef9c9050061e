#include "dissect/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "dissect/errors.hpp"

namespace dissect {

using nlohmann::json;

DissectInputs load_inputs(const std::string& masks_path, const std::string& acts_path,
                          const std::string& catalog_path, std::uint32_t min_samples) {
  DissectInputs in;
  auto catalog = load_catalog(catalog_path);
  in.masks = load_masks(masks_path);
  in.activations = load_activations(acts_path);
  check_image_sets(in.masks, in.activations);
  in.catalog = filter_concepts(std::move(catalog), in.masks, min_samples);
  return in;
}

namespace {

LengthEntry to_entry(int step, const ScoredExplanation& s, const ConceptCatalog& catalog) {
  return LengthEntry{step, print_form(s.form, catalog), s.length, s.iou, s.detacc};
}

}  // namespace

UnitReport dissect_unit(const ActivationVolume& acts, const ConceptCatalog& catalog, const ConceptIndex& index,
                        const DissectOptions& options) {
  auto unit = build_unit_masks(acts, index.layout(), options.threshold);
  SearchContext ctx(index, unit, catalog.searchable_ids());
  auto state = beam_search(ctx, options.search);

  UnitReport report;
  report.unit_id = acts.unit_id;
  report.threshold = unit.threshold;
  for (const auto& [k, best] : state.per_length_best) report.per_length.push_back(to_entry(k, best, catalog));
  report.chosen_iou = report.per_length.back().form;
  report.chosen_detacc = print_form(select_explanation(state, ctx, SelectionRule::MaxDetAcc).form, catalog);
  report.selected =
      options.search.selection == SelectionRule::MaxDetAcc ? report.chosen_detacc : report.chosen_iou;
  report.stopped_at = state.stopped_at;
  if (options.search.detacc_all) {
    int rank = 0;
    for (const auto& s : state.beam) report.beam.push_back(to_entry(++rank, s, catalog));
  }
  return report;
}

std::vector<UnitReport> dissect_all(const DissectInputs& inputs, const DissectOptions& options) {
  options.search.validate();
  ConceptIndex index(inputs.masks, inputs.catalog.size());
  const auto& units = inputs.activations.units;
  std::vector<UnitReport> reports(units.size());

  unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(units.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < units.size(); ++i) reports[i] = dissect_unit(units[i], inputs.catalog, index, options);
    return reports;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      auto i = next.fetch_add(1);
      if (i >= units.size()) return;
      try {
        reports[i] = dissect_unit(units[i], inputs.catalog, index, options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = units.size();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return reports;
}

namespace {

json entry_json(const LengthEntry& e) {
  json j;
  j["length"] = e.length;
  j["form"] = e.form;
  j["form_length"] = e.form_length;
  j["iou"] = e.iou;
  j["detacc"] = e.detacc ? json(*e.detacc) : json(nullptr);
  return j;
}

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::MalformedReport, "malformed report: " + what);
}

const json& field(const json& obj, const char* name) {
  if (!obj.is_object() || !obj.contains(name)) malformed(std::string("missing field '") + name + "'");
  return obj.at(name);
}

double number_field(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number()) malformed(std::string("field '") + name + "' is not a number");
  return v.get<double>();
}

std::int64_t int_field(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_number_integer()) malformed(std::string("field '") + name + "' is not an integer");
  return v.get<std::int64_t>();
}

std::string string_field(const json& obj, const char* name) {
  const auto& v = field(obj, name);
  if (!v.is_string()) malformed(std::string("field '") + name + "' is not a string");
  return v.get<std::string>();
}

LengthEntry entry_from(const json& j) {
  LengthEntry e;
  e.length = static_cast<int>(int_field(j, "length"));
  e.form = string_field(j, "form");
  e.form_length = static_cast<int>(int_field(j, "form_length"));
  e.iou = number_field(j, "iou");
  const auto& d = field(j, "detacc");
  if (d.is_number())
    e.detacc = d.get<double>();
  else if (!d.is_null())
    malformed("field 'detacc' must be a number or null");
  return e;
}

std::vector<LengthEntry> entries_from(const json& arr, const char* name) {
  if (!arr.is_array()) malformed(std::string("field '") + name + "' is not an array");
  std::vector<LengthEntry> out;
  for (const auto& e : arr) out.push_back(entry_from(e));
  return out;
}

}  // namespace

std::string reports_to_json(std::span<const UnitReport> reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j;
    j["unit_id"] = r.unit_id;
    j["threshold"] = r.threshold;
    json per = json::array();
    for (const auto& e : r.per_length) per.push_back(entry_json(e));
    j["per_length"] = std::move(per);
    j["chosen_iou"] = r.chosen_iou;
    j["chosen_detacc"] = r.chosen_detacc;
    j["selected"] = r.selected;
    j["stopped_at"] = r.stopped_at ? json(*r.stopped_at) : json(nullptr);
    if (!r.beam.empty()) {
      json beam = json::array();
      for (const auto& e : r.beam) beam.push_back(entry_json(e));
      j["beam"] = std::move(beam);
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<UnitReport> reports_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(e.what());
  }
  if (!doc.is_array()) malformed("top level must be an array");
  std::vector<UnitReport> out;
  for (const auto& j : doc) {
    UnitReport r;
    auto id = int_field(j, "unit_id");
    if (id < 0 || id > std::numeric_limits<UnitId>::max()) malformed("unit_id out of range");
    r.unit_id = static_cast<UnitId>(id);
    r.threshold = number_field(j, "threshold");
    r.per_length = entries_from(field(j, "per_length"), "per_length");
    if (r.per_length.empty()) malformed("unit " + std::to_string(id) + " has no per_length entries");
    r.chosen_iou = string_field(j, "chosen_iou");
    r.chosen_detacc = string_field(j, "chosen_detacc");
    r.selected = string_field(j, "selected");
    const auto& stop = field(j, "stopped_at");
    if (stop.is_number_integer())
      r.stopped_at = stop.get<int>();
    else if (!stop.is_null())
      malformed("field 'stopped_at' must be an integer or null");
    if (j.contains("beam")) r.beam = entries_from(j.at("beam"), "beam");
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_score(double value) {
  int decimals = 6;
  if (value != 0.0 && std::isfinite(value)) {
    int exponent = static_cast<int>(std::floor(std::log10(std::fabs(value))));
    decimals = std::max(6, 5 - exponent);
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::InvalidArgument, "correlation inputs differ in length");
  auto n = static_cast<double>(x.size());
  if (x.empty()) return std::nan("");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (auto k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

std::string summarize_reports(std::span<const UnitReport> reports) {
  std::ostringstream out;
  out << "unit_id,length,iou,detacc,chosen\n";
  std::vector<double> ious;
  std::vector<double> detaccs;
  for (const auto& r : reports) {
    if (r.per_length.empty()) malformed("unit " + std::to_string(r.unit_id) + " has no per_length entries");
    std::size_t detacc_row = r.per_length.size();
    for (std::size_t i = 0; i < r.per_length.size(); ++i)
      if (r.per_length[i].form == r.chosen_detacc) {
        detacc_row = i;
        break;
      }
    for (std::size_t i = 0; i < r.per_length.size(); ++i) {
      const auto& e = r.per_length[i];
      bool by_iou = i + 1 == r.per_length.size();
      bool by_detacc = i == detacc_row;
      const char* chosen = by_iou && by_detacc ? "both" : by_iou ? "iou" : by_detacc ? "detacc" : "";
      out << r.unit_id << ',' << e.length << ',' << format_score(e.iou) << ','
          << (e.detacc ? format_score(*e.detacc) : std::string("no-support")) << ',' << chosen << '\n';
    }
    const auto& last = r.per_length.back();
    ious.push_back(last.iou);
    detaccs.push_back(detacc_or_zero(last.detacc));
  }
  auto fmt = [](double v) { return std::isnan(v) ? std::string("nan") : format_score(v); };
  out << "# pearson=" << fmt(pearson(ious, detaccs)) << '\n';
  out << "# spearman=" << fmt(spearman(ious, detaccs)) << '\n';
  return out.str();
}

}  // namespace dissect
