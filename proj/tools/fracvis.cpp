#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fracvis/analysis.hpp"
#include "fracvis/geometry.hpp"
#include "fracvis/grid.hpp"
#include "fracvis/io.hpp"
#include "fracvis/montecarlo.hpp"
#include "fracvis/rational.hpp"
#include "fracvis/visibility.hpp"

namespace {

using namespace fracvis;

constexpr int kExitUsage = 1;
constexpr int kExitCertify = 2;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(',', start);
    if (pos == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

struct TreeOpts {
  std::string path;
  std::string p = "1/2";
  int M = 2;
  int depth = 6;
  uint64_t seed = 1;
};

void add_tree_opts(CLI::App* cmd, TreeOpts& o, bool with_file = true) {
  if (with_file)
    cmd->add_option("--tree", o.path, "tree JSON file; overrides generation");
  cmd->add_option("--p", o.p, "retention probability, e.g. 3/4")
      ->capture_default_str();
  cmd->add_option("--M", o.M, "subdivision factor")->capture_default_str();
  cmd->add_option("--depth", o.depth, "tree depth")->capture_default_str();
  cmd->add_option("--seed", o.seed, "generator seed")->capture_default_str();
}

PercolationTree load_tree(const TreeOpts& o) {
  if (!o.path.empty()) return tree_from_json(read_json_file(o.path));
  PercParams params;
  params.p = Rat::parse(o.p);
  params.M = o.M;
  params.depth = o.depth;
  params.seed = o.seed;
  return generate(params);
}

struct SightOpts {
  std::string line;
  std::string point;
};

void add_sight_opts(CLI::App* cmd, SightOpts& o) {
  cmd->add_option("--line", o.line, "line sight: a,b or a,b,side");
  cmd->add_option("--point", o.point, "point sight: x1,x2 (rationals)");
}

std::optional<SightSpec> parse_sight(const SightOpts& o) {
  if (!o.line.empty() && !o.point.empty())
    throw std::invalid_argument("give either --line or --point, not both");
  if (!o.line.empty()) {
    auto parts = split_commas(o.line);
    if (parts.size() != 2 && parts.size() != 3)
      throw std::invalid_argument("--line needs a,b or a,b,side");
    LineSight ls;
    ls.d = make_direction(std::stoll(parts[0]), std::stoll(parts[1]));
    ls.side = parts.size() == 3 ? std::stoi(parts[2]) : 1;
    if (ls.side != 1 && ls.side != -1)
      throw std::invalid_argument("side must be +1 or -1");
    return SightSpec{ls};
  }
  if (!o.point.empty()) {
    auto parts = split_commas(o.point);
    if (parts.size() != 2)
      throw std::invalid_argument("--point needs x1,x2");
    return SightSpec{
        make_viewpoint(Rat::parse(parts[0]), Rat::parse(parts[1]))};
  }
  return std::nullopt;
}

VisibleCover compute_cover(const PercolationTree& tree, int level,
                           const SightSpec& sight) {
  if (const LineSight* ls = std::get_if<LineSight>(&sight))
    return visible_from_line(tree, level, ls->d, ls->side);
  return visible_from_point(tree, level, std::get<Viewpoint>(sight));
}

void emit(const std::string& out_path, const Json& j) {
  if (out_path.empty() || out_path == "-")
    std::cout << dump_json(j);
  else
    write_json_file(out_path, j);
}

int cmd_gen(const TreeOpts& topts, const std::string& out) {
  PercolationTree tree = load_tree(topts);
  emit(out, tree_to_json(tree));
  return 0;
}

int cmd_vis(const TreeOpts& topts, const SightOpts& sopts, int level,
            const std::string& out, const std::string& csv) {
  PercolationTree tree = load_tree(topts);
  auto sight = parse_sight(sopts);
  if (!sight) throw std::invalid_argument("vis needs --line or --point");
  if (level < 0) level = tree.params.depth;
  VisibleCover cover = compute_cover(tree, level, *sight);
  if (!out.empty()) emit(out, cover_to_json(cover));
  if (!csv.empty()) {
    ScalingTable st;
    st.k_lo = 0;
    st.counts = cover.counts;
    st.p = tree.params.p;
    st.M = tree.params.M;
    st.n = level;
    st.sight = std::holds_alternative<LineSight>(*sight) ? "line" : "point";
    st.seed = tree.params.seed;
    write_text_file(csv, scaling_csv(st));
  }
  std::cout << "marked=" << cover.marked.size()
            << " level=" << cover.level
            << " fallback=" << (cover.used_fallback ? 1 : 0) << "\n";
  return 0;
}

int cmd_boxdim(const TreeOpts& topts, const SightOpts& sopts, int level,
               int k_lo, int k_hi, const std::string& csv) {
  PercolationTree tree = load_tree(topts);
  auto sight = parse_sight(sopts);
  if (level < 0) level = tree.params.depth;
  ScalingTable st;
  st.p = tree.params.p;
  st.M = tree.params.M;
  st.n = level;
  st.seed = tree.params.seed;
  if (k_lo < 0) k_lo = 2;
  if (k_hi < 0) k_hi = level;
  st.k_lo = k_lo;
  if (sight) {
    VisibleCover cover = compute_cover(tree, level, *sight);
    st.sight = std::holds_alternative<LineSight>(*sight) ? "line" : "point";
    for (int k = k_lo; k <= k_hi; ++k)
      st.counts.push_back(cover.counts[size_t(k)]);
  } else {
    st.sight = "set";
    std::vector<DyadicSquare> leaves;
    for (const Cell& c : squares_at(tree, level))
      leaves.push_back(DyadicSquare{level, c.ix, c.iy});
    for (int k = k_lo; k <= k_hi; ++k)
      st.counts.push_back(box_count(leaves, k, tree.params.M));
  }
  if (!csv.empty()) write_text_file(csv, scaling_csv(st));
  SlopeFit fit = dim_slope(st, k_lo, k_hi);
  std::cout << "slope=" << fit.slope << " max_residual=" << fit.max_residual
            << " exact=" << (fit.exact ? 1 : 0);
  if (!sight)
    std::cout << " theoretical=" << theoretical_dim(tree.params.p, tree.params.M);
  std::cout << "\n";
  return 0;
}

int cmd_stripes(const TreeOpts& topts, const std::string& line, int n,
                const std::string& eps_str, int m, const std::string& csv) {
  PercolationTree tree = load_tree(topts);
  auto parts = split_commas(line);
  if (parts.size() != 2 && parts.size() != 3)
    throw std::invalid_argument("--line needs a,b or a,b,side");
  DirectionSpec d = make_direction(std::stoll(parts[0]), std::stoll(parts[1]));
  int side = parts.size() == 3 ? std::stoi(parts[2]) : 1;
  if (side != 1 && side != -1)
    throw std::invalid_argument("side must be +1 or -1");
  if (n < 0) n = std::max(4, tree.params.depth - 4);
  if (m < 0) m = std::min(n + 4, tree.params.depth);
  Rat eps = eps_str.empty() ? stripe_default_eps(d) : Rat::parse(eps_str);
  LengthEstimate est = visible_length_estimate(tree, n, d, side, eps, m);
  if (!csv.empty()) write_text_file(csv, stripe_csv(est));
  std::cout << "n=" << n << " m=" << m << " eps=" << eps.str()
            << " stripes=" << est.y.size() << " S=" << est.s
            << " length=" << est.value << "\n";
  return 0;
}

int cmd_coverage(const TreeOpts& topts, const SightOpts& sopts, int m_lo,
                 int m_hi, const std::string& eps_str) {
  PercolationTree tree = load_tree(topts);
  auto sight = parse_sight(sopts);
  if (!sight) throw std::invalid_argument("coverage needs --line or --point");
  if (m_hi < 0) m_hi = tree.params.depth;
  if (m_lo < 0) m_lo = m_hi;
  Rat eps = eps_str.empty() ? Rat(1, 8) : Rat::parse(eps_str);
  int violations = 0;
  bool prev = false;
  for (int m = m_lo; m <= m_hi; ++m) {
    bool covered;
    if (const LineSight* ls = std::get_if<LineSight>(&*sight))
      covered = projection_coverage(tree, m, ls->d, eps);
    else
      covered = radial_coverage(tree, m, std::get<Viewpoint>(*sight), eps);
    if (m > m_lo && covered && !prev) ++violations;
    prev = covered;
    std::cout << "m=" << m << " covered=" << (covered ? 1 : 0) << "\n";
  }
  if (violations > 0) {
    std::cerr << "coverage is not monotone in m (" << violations
              << " violations)\n";
    return kExitCertify;
  }
  return 0;
}

int cmd_passed(const TreeOpts& topts, const std::string& a_str,
               const std::string& b_str, int k_lo, int k_hi) {
  PercolationTree tree = load_tree(topts);
  auto pa = split_commas(a_str), pb = split_commas(b_str);
  if (pa.size() != 2 || pb.size() != 2)
    throw std::invalid_argument("--a and --b need x,y");
  RatPoint a{Rat::parse(pa[0]), Rat::parse(pa[1])};
  RatPoint b{Rat::parse(pb[0]), Rat::parse(pb[1])};
  if (k_hi < 0) k_hi = tree.params.depth;
  if (k_lo < 0) k_lo = k_hi;
  for (int k = k_lo; k <= k_hi; ++k)
    std::cout << "k=" << k << " passed=" << count_passed(tree, k, a, b) << "\n";
  return 0;
}

int cmd_mc(const std::string& config_path, const std::string& out) {
  ExperimentConfig config = config_from_json(read_json_file(config_path));
  ExperimentReport report = run(config);
  if (!out.empty()) emit(out, report_to_json(report));
  for (const auto& cell : report.cells) {
    std::cout << cell.label;
    size_t shown = 0;
    for (const auto& [k, v] : cell.scalars) {
      if (shown++ == 4) break;
      std::cout << " " << k << "=" << v;
    }
    std::cout << "\n";
  }
  for (const auto& flag : report.flags) std::cerr << "flag: " << flag << "\n";
  if (report.config.kind == ExperimentKind::kCoverage) {
    for (const auto& cell : report.cells)
      for (const auto& [k, v] : cell.scalars)
        if (k == "violations" && v > 0) {
          std::cerr << "audit failure: coverage monotonicity violated in "
                    << cell.label << "\n";
          return kExitCertify;
        }
  }
  return 0;
}

int cmd_certify(const std::string& tree_path, const std::string& cover_path) {
  PercolationTree tree = tree_from_json(read_json_file(tree_path));
  VisibleCover stored = cover_from_json(read_json_file(cover_path));
  VisibleCover fresh = compute_cover(tree, stored.level, stored.sight);
  if (fresh.marked != stored.marked) {
    std::cerr << "[FAIL] marked set mismatch: stored " << stored.marked.size()
              << " squares, recomputed " << fresh.marked.size() << "\n";
    return kExitCertify;
  }
  if (fresh.counts != stored.counts) {
    std::cerr << "[FAIL] ancestor counts mismatch\n";
    return kExitCertify;
  }
  for (const DyadicSquare& sq : stored.marked) {
    try {
      witness_ray(stored, sq, tree, stored.level);
    } catch (const std::exception& e) {
      std::cerr << "[FAIL] witness for (" << sq.ix << "," << sq.iy
                << "): " << e.what() << "\n";
      return kExitCertify;
    }
  }
  std::cout << "[PASS] cover certified: " << stored.marked.size()
            << " squares at level " << stored.level << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fractal percolation visibility laboratory"};
  app.require_subcommand(1);

  TreeOpts gen_tree;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen", "generate a percolation tree");
  add_tree_opts(gen, gen_tree, false);
  gen->add_option("--out", gen_out, "output path, - for stdout");

  TreeOpts vis_tree;
  SightOpts vis_sight;
  int vis_level = -1;
  std::string vis_out, vis_csv;
  CLI::App* vis = app.add_subcommand("vis", "compute a visible cover");
  add_tree_opts(vis, vis_tree);
  add_sight_opts(vis, vis_sight);
  vis->add_option("--level", vis_level, "cover level, default tree depth");
  vis->add_option("--out", vis_out, "cover JSON output path");
  vis->add_option("--csv", vis_csv, "scaling table CSV output path");

  TreeOpts box_tree;
  SightOpts box_sight;
  int box_level = -1, box_klo = -1, box_khi = -1;
  std::string box_csv;
  CLI::App* box = app.add_subcommand("boxdim", "box-count scaling and slope");
  add_tree_opts(box, box_tree);
  add_sight_opts(box, box_sight);
  box->add_option("--level", box_level, "square level, default tree depth");
  box->add_option("--k-lo", box_klo, "lowest slope level");
  box->add_option("--k-hi", box_khi, "highest slope level");
  box->add_option("--csv", box_csv, "scaling table CSV output path");

  TreeOpts str_tree;
  std::string str_line, str_eps, str_csv;
  int str_n = -1, str_m = -1;
  CLI::App* str = app.add_subcommand("stripes", "stripe length estimate");
  add_tree_opts(str, str_tree);
  str->add_option("--line", str_line, "direction a,b or a,b,side")->required();
  str->add_option("--n", str_n, "stripe level, default depth-4");
  str->add_option("--eps", str_eps, "stripe width, default per direction");
  str->add_option("--m", str_m, "block depth, default min(n+4, depth)");
  str->add_option("--csv", str_csv, "per-stripe CSV output path");

  TreeOpts cov_tree;
  SightOpts cov_sight;
  int cov_mlo = -1, cov_mhi = -1;
  std::string cov_eps;
  CLI::App* cov = app.add_subcommand("coverage", "carved sight coverage");
  add_tree_opts(cov, cov_tree);
  add_sight_opts(cov, cov_sight);
  cov->add_option("--m-lo", cov_mlo, "lowest shadow depth");
  cov->add_option("--m-hi", cov_mhi, "highest shadow depth, default depth");
  cov->add_option("--eps", cov_eps, "carve size, default 1/8");

  TreeOpts pas_tree;
  std::string pas_a, pas_b;
  int pas_klo = -1, pas_khi = -1;
  CLI::App* pas = app.add_subcommand("passed", "count squares a line passes");
  add_tree_opts(pas, pas_tree);
  pas->add_option("--a", pas_a, "first line point x,y")->required();
  pas->add_option("--b", pas_b, "second line point x,y")->required();
  pas->add_option("--k-lo", pas_klo, "lowest level");
  pas->add_option("--k-hi", pas_khi, "highest level, default depth");

  std::string mc_config, mc_out;
  CLI::App* mc = app.add_subcommand("mc", "run a Monte Carlo experiment");
  mc->add_option("--config", mc_config, "experiment config JSON")->required();
  mc->add_option("--out", mc_out, "report JSON output path");

  std::string cert_tree, cert_cover;
  CLI::App* cert = app.add_subcommand("certify", "re-verify a stored cover");
  cert->add_option("--tree", cert_tree, "tree JSON file")->required();
  cert->add_option("--cover", cert_cover, "cover JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_tree, gen_out);
    if (vis->parsed())
      return cmd_vis(vis_tree, vis_sight, vis_level, vis_out, vis_csv);
    if (box->parsed())
      return cmd_boxdim(box_tree, box_sight, box_level, box_klo, box_khi,
                        box_csv);
    if (str->parsed())
      return cmd_stripes(str_tree, str_line, str_n, str_eps, str_m, str_csv);
    if (cov->parsed())
      return cmd_coverage(cov_tree, cov_sight, cov_mlo, cov_mhi, cov_eps);
    if (pas->parsed())
      return cmd_passed(pas_tree, pas_a, pas_b, pas_klo, pas_khi);
    if (mc->parsed()) return cmd_mc(mc_config, mc_out);
    if (cert->parsed()) return cmd_certify(cert_tree, cert_cover);
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertify;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
