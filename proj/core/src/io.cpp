#include "fracvis/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace fracvis {

namespace {

void require_format(const Json& j, const char* type) {
  if (!j.is_object() || !j.contains("format") || j["format"] != 1)
    throw std::invalid_argument("expected a format-1 document");
  if (!j.contains("type") || j["type"] != type)
    throw std::invalid_argument(std::string("expected a ") + type +
                                " document");
}

Json rat_json(const Rat& q) { return q.str(); }

Rat rat_from(const Json& j) {
  if (j.is_number_integer()) return Rat(static_cast<long long>(j.get<int64_t>()), 1);
  if (j.is_string()) return Rat::parse(j.get<std::string>());
  throw std::invalid_argument("rational values must be strings or integers");
}

Json cells_json(const std::vector<Cell>& cells) {
  Json out = Json::array();
  for (const Cell& c : cells) out.push_back(Json::array({c.ix, c.iy}));
  return out;
}

std::vector<Cell> cells_from(const Json& j) {
  std::vector<Cell> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument("cells must be [ix, iy] pairs");
    out.push_back(Cell{e[0].get<int32_t>(), e[1].get<int32_t>()});
  }
  return out;
}

Json squares_json(const std::vector<DyadicSquare>& squares) {
  Json out = Json::array();
  for (const DyadicSquare& s : squares)
    out.push_back(Json::array({s.ix, s.iy}));
  return out;
}

std::vector<DyadicSquare> squares_from(const Json& j, int level) {
  std::vector<DyadicSquare> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw std::invalid_argument("squares must be [ix, iy] pairs");
    out.push_back(DyadicSquare{level, e[0].get<int64_t>(), e[1].get<int64_t>()});
  }
  return out;
}

Json point_json(const RatPoint& p) {
  return Json::array({rat_json(p.x), rat_json(p.y)});
}

RatPoint point_from(const Json& j) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("points must be [x, y] pairs");
  return RatPoint{rat_from(j[0]), rat_from(j[1])};
}

}  // namespace

Json tree_to_json(const PercolationTree& tree) {
  Json j;
  j["format"] = 1;
  j["type"] = "tree";
  j["p"] = rat_json(tree.params.p);
  j["M"] = tree.params.M;
  j["depth"] = tree.params.depth;
  j["seed"] = tree.params.seed;
  Json levels = Json::array();
  for (const auto& level : tree.levels) levels.push_back(cells_json(level));
  j["levels"] = levels;
  return j;
}

PercolationTree tree_from_json(const Json& j) {
  require_format(j, "tree");
  PercParams params;
  params.p = rat_from(j.at("p"));
  params.M = j.at("M").get<int>();
  params.depth = j.at("depth").get<int>();
  params.seed = j.at("seed").get<uint64_t>();
  if (j.contains("levels")) {
    std::vector<std::vector<Cell>> levels;
    for (const auto& level : j.at("levels")) levels.push_back(cells_from(level));
    return from_levels(params, std::move(levels));
  }
  return generate(params);
}

Json sight_to_json(const SightSpec& sight) {
  Json j;
  if (const LineSight* ls = std::get_if<LineSight>(&sight)) {
    j["kind"] = "line";
    j["a"] = ls->d.a;
    j["b"] = ls->d.b;
    j["side"] = ls->side;
  } else {
    const Viewpoint& vp = std::get<Viewpoint>(sight);
    j["kind"] = "point";
    j["x"] = rat_json(vp.x.x);
    j["y"] = rat_json(vp.x.y);
  }
  return j;
}

SightSpec sight_from_json(const Json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "line") {
    LineSight ls;
    ls.d = make_direction(j.at("a").get<int64_t>(), j.at("b").get<int64_t>());
    ls.side = j.at("side").get<int>();
    if (ls.side != 1 && ls.side != -1)
      throw std::invalid_argument("side must be +1 or -1");
    return ls;
  }
  if (kind == "point")
    return make_viewpoint(rat_from(j.at("x")), rat_from(j.at("y")));
  throw std::invalid_argument("unknown sight kind: " + kind);
}

Json cover_to_json(const VisibleCover& cover) {
  Json j;
  j["format"] = 1;
  j["type"] = "cover";
  j["sight"] = sight_to_json(cover.sight);
  j["level"] = cover.level;
  j["marked"] = squares_json(cover.marked);
  Json params = Json::array();
  for (const Rat& w : cover.witness_params) params.push_back(rat_json(w));
  j["witness_params"] = params;
  j["counts"] = cover.counts;
  j["used_fallback"] = cover.used_fallback;
  j["fallback_added"] = squares_json(cover.fallback_added);
  j["fallback_removed"] = squares_json(cover.fallback_removed);
  return j;
}

VisibleCover cover_from_json(const Json& j) {
  require_format(j, "cover");
  VisibleCover cover;
  cover.sight = sight_from_json(j.at("sight"));
  cover.level = j.at("level").get<int>();
  if (cover.level < 0) throw std::invalid_argument("negative cover level");
  cover.marked = squares_from(j.at("marked"), cover.level);
  for (const auto& e : j.at("witness_params"))
    cover.witness_params.push_back(rat_from(e));
  if (cover.witness_params.size() != cover.marked.size())
    throw std::invalid_argument("witness_params must parallel marked");
  cover.counts = j.at("counts").get<std::vector<int64_t>>();
  if (cover.counts.size() != size_t(cover.level) + 1)
    throw std::invalid_argument("counts must cover levels 0..level");
  cover.used_fallback = j.value("used_fallback", false);
  if (j.contains("fallback_added"))
    cover.fallback_added = squares_from(j.at("fallback_added"), cover.level);
  if (j.contains("fallback_removed"))
    cover.fallback_removed = squares_from(j.at("fallback_removed"), cover.level);
  return cover;
}

Json config_to_json(const ExperimentConfig& config) {
  Json j;
  j["format"] = 1;
  j["type"] = "config";
  j["kind"] = kind_name(config.kind);
  Json ps = Json::array();
  for (const Rat& p : config.ps) ps.push_back(rat_json(p));
  j["ps"] = ps;
  j["M"] = config.M;
  j["depth"] = config.depth;
  j["trials"] = config.trials;
  j["seed"] = config.seed;
  Json dirs = Json::array();
  for (const auto& d : config.directions)
    dirs.push_back(Json::array({d.a, d.b}));
  j["directions"] = dirs;
  Json vps = Json::array();
  for (const auto& v : config.viewpoints) vps.push_back(point_json(v));
  j["viewpoints"] = vps;
  j["eps"] = rat_json(config.eps);
  j["m"] = config.m;
  j["k_lo"] = config.k_lo;
  j["k_hi"] = config.k_hi;
  j["ms"] = config.ms;
  j["eta"] = config.eta;
  Json lines = Json::array();
  for (const auto& ln : config.lines)
    lines.push_back(Json::array({point_json(ln[0]), point_json(ln[1])}));
  j["lines"] = lines;
  j["n_growth"] = config.n_growth;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  require_format(j, "config");
  ExperimentConfig c;
  c.kind = kind_from_name(j.at("kind").get<std::string>());
  for (const auto& e : j.at("ps")) c.ps.push_back(rat_from(e));
  if (j.contains("M")) c.M = j.at("M").get<int>();
  if (j.contains("depth")) c.depth = j.at("depth").get<int>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int64_t>();
  if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
  if (j.contains("directions"))
    for (const auto& e : j.at("directions")) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("directions must be [a, b] pairs");
      c.directions.push_back(
          DirectionSpec{e[0].get<int64_t>(), e[1].get<int64_t>()});
    }
  if (j.contains("viewpoints"))
    for (const auto& e : j.at("viewpoints")) c.viewpoints.push_back(point_from(e));
  if (j.contains("eps")) c.eps = rat_from(j.at("eps"));
  if (j.contains("m")) c.m = j.at("m").get<int>();
  if (j.contains("k_lo")) c.k_lo = j.at("k_lo").get<int>();
  if (j.contains("k_hi")) c.k_hi = j.at("k_hi").get<int>();
  if (j.contains("ms")) c.ms = j.at("ms").get<std::vector<int>>();
  if (j.contains("eta")) c.eta = j.at("eta").get<double>();
  if (j.contains("lines"))
    for (const auto& e : j.at("lines")) {
      if (!e.is_array() || e.size() != 2)
        throw std::invalid_argument("lines must be endpoint pairs");
      c.lines.push_back({point_from(e[0]), point_from(e[1])});
    }
  if (j.contains("n_growth")) c.n_growth = j.at("n_growth").get<int>();
  return c;
}

Json report_to_json(const ExperimentReport& report) {
  Json j;
  j["format"] = 1;
  j["type"] = "report";
  j["config"] = config_to_json(report.config);
  Json cells = Json::array();
  for (const auto& cell : report.cells) {
    Json cj;
    cj["label"] = cell.label;
    Json scalars;
    for (const auto& [k, v] : cell.scalars) scalars[k] = v;
    cj["scalars"] = scalars;
    cj["columns"] = cell.columns;
    cj["rows"] = cell.rows;
    cj["notes"] = cell.notes;
    cells.push_back(cj);
  }
  j["cells"] = cells;
  j["flags"] = report.flags;
  j["trials_run"] = report.trials_run;
  j["trials_discarded"] = report.trials_discarded;
  j["trial_seeds"] = report.trial_seeds;
  return j;
}

std::string scaling_csv(const ScalingTable& table) {
  std::ostringstream out;
  out << "# p=" << table.p.str() << ",M=" << table.M << ",n=" << table.n
      << ",sight=" << table.sight << ",seed=" << table.seed << "\n";
  out << "k,count\n";
  for (size_t i = 0; i < table.counts.size(); ++i)
    out << table.k_lo + int(i) << "," << table.counts[i] << "\n";
  return out.str();
}

std::string stripe_csv(const LengthEstimate& est) {
  std::ostringstream out;
  out << "# S=" << est.s << "\n";
  out << "j,y,first_block\n";
  for (size_t i = 0; i < est.y.size(); ++i)
    out << i << "," << est.y[i] << "," << est.first_block[i] << "\n";
  return out.str();
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, dump_json(j));
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return Json::parse(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace fracvis
