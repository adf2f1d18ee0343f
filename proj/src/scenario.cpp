#include "crowdsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "crowdsim/diagnostics.hpp"
#include "crowdsim/numeric.hpp"
#include "crowdsim/velocity.hpp"

namespace crowdsim {
namespace {

constexpr double kMergeGuardEpsilon = 1e-9;

[[noreturn]] void fail_at(const std::string& file, int line,
                          const std::string& what) {
  std::ostringstream msg;
  msg << file << ":" << line << ": " << what;
  throw std::runtime_error(msg.str());
}

[[noreturn]] void fail_config(const std::string& what) {
  throw std::runtime_error("config error: " + what);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& file, int line, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at(file, line, "expected a number, got '" + s + "'");
  }
}

int parse_int(const std::string& file, int line, const std::string& s) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail_at(file, line, "expected an integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& file, int line, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  fail_at(file, line, "expected true or false, got '" + s + "'");
}

std::vector<double> parse_numbers(const std::string& file, int line,
                                  const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number(file, line, item));
  }
  return out;
}

Vec2 parse_vec2(const std::string& file, int line, const std::string& s) {
  const auto v = parse_numbers(file, line, s, ',');
  if (v.size() != 2) fail_at(file, line, "expected 'x,y', got '" + s + "'");
  return {v[0], v[1]};
}

}  // namespace

ScenarioConfig parse_config(const std::string& text,
                            const std::string& filename) {
  ScenarioConfig cfg;
  cfg.populations.clear();
  cfg.interactions.clear();

  enum class Section { None, Grid, Time, Population, Interaction, Flags };
  Section section = Section::None;
  PopulationSpec* pop = nullptr;
  InteractionSpec* inter = nullptr;
  std::set<std::string> seen_keys;  // per section instance

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;

    if (s.front() == '[') {
      if (s.back() != ']') fail_at(filename, line, "malformed section header");
      const std::string header = trim(s.substr(1, s.size() - 2));
      seen_keys.clear();
      pop = nullptr;
      inter = nullptr;
      if (header == "grid") {
        section = Section::Grid;
      } else if (header == "time") {
        section = Section::Time;
      } else if (header == "flags") {
        section = Section::Flags;
      } else if (header == "interaction") {
        section = Section::Interaction;
        cfg.interactions.emplace_back();
        inter = &cfg.interactions.back();
      } else if (header.rfind("population", 0) == 0) {
        const auto q1 = header.find('"');
        const auto q2 = header.rfind('"');
        if (q1 == std::string::npos || q2 <= q1)
          fail_at(filename, line, "population section needs a quoted id");
        section = Section::Population;
        cfg.populations.emplace_back();
        pop = &cfg.populations.back();
        pop->id = header.substr(q1 + 1, q2 - q1 - 1);
      } else {
        fail_at(filename, line, "unknown section [" + header + "]");
      }
      continue;
    }

    const auto eq = s.find('=');
    if (eq == std::string::npos)
      fail_at(filename, line, "expected 'key = value', got '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail_at(filename, line, "empty key");
    if (!seen_keys.insert(key).second)
      fail_at(filename, line, "duplicate key '" + key + "'");

    switch (section) {
      case Section::None:
        fail_at(filename, line, "key '" + key + "' outside any section");
      case Section::Grid:
        if (key == "L")
          cfg.length = parse_number(filename, line, value);
        else if (key == "W")
          cfg.width = parse_number(filename, line, value);
        else if (key == "nx")
          cfg.nx = parse_int(filename, line, value);
        else if (key == "ny")
          cfg.ny = parse_int(filename, line, value);
        else
          fail_at(filename, line, "unknown key '" + key + "' in [grid]");
        break;
      case Section::Time:
        if (key == "dt")
          cfg.dt = parse_number(filename, line, value);
        else if (key == "steps")
          cfg.steps = parse_int(filename, line, value);
        else if (key == "frame_stride")
          cfg.frame_stride = parse_int(filename, line, value);
        else
          fail_at(filename, line, "unknown key '" + key + "' in [time]");
        break;
      case Section::Population:
        if (key == "kind") {
          if (value == "discrete")
            pop->kind = PopulationSpec::Kind::Discrete;
          else if (value == "density")
            pop->kind = PopulationSpec::Kind::Density;
          else
            fail_at(filename, line, "kind must be discrete or density");
        } else if (key == "weight") {
          pop->weight = parse_number(filename, line, value);
        } else if (key == "positions") {
          std::stringstream ss(value);
          std::string item;
          while (std::getline(ss, item, ';')) {
            item = trim(item);
            if (item.empty()) continue;
            pop->positions.push_back(parse_vec2(filename, line, item));
          }
        } else if (key == "block") {
          const auto v = parse_numbers(filename, line, value, ',');
          if (v.size() != 4)
            fail_at(filename, line, "block must be 'x0,y0,x1,y1'");
          pop->block = Rect{{v[0], v[1]}, {v[2], v[3]}};
        } else if (key == "rho") {
          pop->rho = parse_number(filename, line, value);
        } else if (key == "vdes") {
          pop->vdes = parse_vec2(filename, line, value);
        } else if (key == "sigma") {
          pop->sigma = parse_number(filename, line, value);
        } else {
          fail_at(filename, line,
                  "unknown key '" + key + "' in [population]");
        }
        break;
      case Section::Interaction:
        if (key == "src") {
          inter->src = value;
        } else if (key == "dst") {
          inter->dst = value;
        } else if (key == "kind") {
          if (value == "ar")
            inter->kind = KernelKind::AttractRepel;
          else if (value == "r")
            inter->kind = KernelKind::RepelOnly;
          else
            fail_at(filename, line, "kind must be ar or r");
        } else if (key == "F") {
          inter->strength = parse_number(filename, line, value);
        } else if (key == "Rr") {
          inter->repel_radius = parse_number(filename, line, value);
        } else if (key == "Ra") {
          inter->attract_radius = parse_number(filename, line, value);
        } else {
          fail_at(filename, line,
                  "unknown key '" + key + "' in [interaction]");
        }
        break;
      case Section::Flags:
        if (key == "allow_boundary_loss")
          cfg.allow_boundary_loss = parse_bool(filename, line, value);
        else if (key == "entropy_audit")
          cfg.entropy_audit = parse_bool(filename, line, value);
        else
          fail_at(filename, line, "unknown key '" + key + "' in [flags]");
        break;
    }
  }

  // ---- validation ----
  if (!(cfg.length > 0.0) || !(cfg.width > 0.0))
    fail_config("grid extents L, W must be positive");
  if (cfg.nx < 1 || cfg.ny < 1) fail_config("grid cell counts must be >= 1");
  if (!(cfg.dt > 0.0)) fail_config("dt must be positive");
  if (cfg.steps < 0) fail_config("steps must be >= 0");
  if (cfg.frame_stride < 1) fail_config("frame_stride must be >= 1");
  if (cfg.populations.empty()) fail_config("at least one population required");

  const Rect domain{{0.0, 0.0}, {cfg.length, cfg.width}};
  std::set<std::string> ids;
  for (const auto& p : cfg.populations) {
    if (p.id.empty()) fail_config("population id must not be empty");
    if (p.id.find_first_not_of(
            "abcdefghijklmnopqrstuvwxyz"
            "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") != std::string::npos)
      fail_config("population id '" + p.id +
                  "' may only contain letters, digits, '_' and '-'");
    if (!ids.insert(p.id).second)
      fail_config("duplicate population id '" + p.id + "'");
    if (!(p.sigma >= 0.0 && p.sigma <= 1.0))
      fail_config("population '" + p.id + "': sigma must lie in [0,1]");
    if (p.kind == PopulationSpec::Kind::Discrete) {
      if (!(p.weight > 0.0))
        fail_config("population '" + p.id + "': weight must be positive");
      if (p.positions.empty())
        fail_config("population '" + p.id + "': positions required");
      for (const Vec2& x : p.positions)
        if (!(x.x > 0.0 && x.x < cfg.length && x.y > 0.0 && x.y < cfg.width))
          fail_config("population '" + p.id + "': position (" +
                      format_shortest(x.x) + "," + format_shortest(x.y) +
                      ") must lie strictly inside the domain");
      for (std::size_t i = 0; i + 1 < p.positions.size(); ++i)
        for (std::size_t j = i + 1; j < p.positions.size(); ++j)
          if ((p.positions[j] - p.positions[i]).norm() <= kMergeGuardEpsilon)
            fail_config("population '" + p.id +
                        "': initial positions closer than the merge guard");
    } else {
      if (!(p.rho >= 0.0))
        fail_config("population '" + p.id + "': rho must be >= 0");
      if (!(p.block.lo.x < p.block.hi.x && p.block.lo.y < p.block.hi.y))
        fail_config("population '" + p.id + "': block must have positive size");
      if (!domain.contains(p.block.lo) || !domain.contains(p.block.hi))
        fail_config("population '" + p.id + "': block must lie inside the domain");
    }
  }
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& it : cfg.interactions) {
    if (!ids.count(it.src))
      fail_config("interaction src '" + it.src + "' is not a population");
    if (!ids.count(it.dst))
      fail_config("interaction dst '" + it.dst + "' is not a population");
    if (!pairs.insert({it.src, it.dst}).second)
      fail_config("duplicate interaction (" + it.src + " -> " + it.dst + ")");
    if (!(it.strength >= 0.0)) fail_config("interaction F must be >= 0");
    if (it.kind == KernelKind::AttractRepel) {
      if (!(it.repel_radius > 0.0 && it.repel_radius < it.attract_radius))
        fail_config("interaction (" + it.src + " -> " + it.dst +
                    "): ar kernel requires 0 < Rr < Ra");
    } else {
      if (!(it.repel_radius > 0.0))
        fail_config("interaction (" + it.src + " -> " + it.dst +
                    "): r kernel requires Rr > 0");
      if (it.attract_radius != 0.0)
        fail_config("interaction (" + it.src + " -> " + it.dst +
                    "): Ra is only valid for kind = ar");
    }
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.filename().string());
}

std::string write_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  const auto num = [](double v) { return format_shortest(v); };
  out << "[grid]\n";
  out << "L = " << num(cfg.length) << "\n";
  out << "W = " << num(cfg.width) << "\n";
  out << "nx = " << cfg.nx << "\n";
  out << "ny = " << cfg.ny << "\n\n";
  out << "[time]\n";
  out << "dt = " << num(cfg.dt) << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "frame_stride = " << cfg.frame_stride << "\n";
  for (const auto& p : cfg.populations) {
    out << "\n[population \"" << p.id << "\"]\n";
    if (p.kind == PopulationSpec::Kind::Discrete) {
      out << "kind = discrete\n";
      out << "weight = " << num(p.weight) << "\n";
      out << "positions = ";
      for (std::size_t i = 0; i < p.positions.size(); ++i) {
        if (i) out << "; ";
        out << num(p.positions[i].x) << "," << num(p.positions[i].y);
      }
      out << "\n";
    } else {
      out << "kind = density\n";
      out << "block = " << num(p.block.lo.x) << "," << num(p.block.lo.y) << ","
          << num(p.block.hi.x) << "," << num(p.block.hi.y) << "\n";
      out << "rho = " << num(p.rho) << "\n";
    }
    out << "vdes = " << num(p.vdes.x) << "," << num(p.vdes.y) << "\n";
    out << "sigma = " << num(p.sigma) << "\n";
  }
  for (const auto& it : cfg.interactions) {
    out << "\n[interaction]\n";
    out << "src = " << it.src << "\n";
    out << "dst = " << it.dst << "\n";
    out << "kind = " << (it.kind == KernelKind::AttractRepel ? "ar" : "r")
        << "\n";
    out << "F = " << num(it.strength) << "\n";
    out << "Rr = " << num(it.repel_radius) << "\n";
    if (it.kind == KernelKind::AttractRepel)
      out << "Ra = " << num(it.attract_radius) << "\n";
  }
  out << "\n[flags]\n";
  out << "allow_boundary_loss = "
      << (cfg.allow_boundary_loss ? "true" : "false") << "\n";
  out << "entropy_audit = " << (cfg.entropy_audit ? "true" : "false") << "\n";
  return out.str();
}

namespace {

PopulationSpec discrete_spec(std::string id, double weight,
                             std::vector<Vec2> positions, Vec2 vdes,
                             double sigma) {
  PopulationSpec p;
  p.id = std::move(id);
  p.kind = PopulationSpec::Kind::Discrete;
  p.weight = weight;
  p.positions = std::move(positions);
  p.vdes = vdes;
  p.sigma = sigma;
  return p;
}

PopulationSpec density_spec(std::string id, Rect block, double rho, Vec2 vdes,
                            double sigma) {
  PopulationSpec p;
  p.id = std::move(id);
  p.kind = PopulationSpec::Kind::Density;
  p.block = block;
  p.rho = rho;
  p.vdes = vdes;
  p.sigma = sigma;
  return p;
}

InteractionSpec ar_spec(std::string src, std::string dst, double strength,
                        double rr, double ra) {
  return {std::move(src), std::move(dst), KernelKind::AttractRepel, strength,
          rr, ra};
}

InteractionSpec r_spec(std::string src, std::string dst, double strength,
                       double rr) {
  return {std::move(src), std::move(dst), KernelKind::RepelOnly, strength, rr,
          0.0};
}

// Reference parameters: speed 1.34 along the first axis, crowd kernels
// AR(0.03, 1.5, 3), cross kernels R(0.03, 4), sigma 0.5, M = 60, unit
// cells. The domain is stretched to 100x50 so that the crowd's forward
// numerical tail (the remap support grows one cell per step) stays away
// from the boundary through t = 10.
ScenarioConfig intrusion_config(double cross_repel_radius) {
  ScenarioConfig cfg;
  cfg.length = 100.0;
  cfg.nx = 100;
  cfg.steps = 1000;
  cfg.populations = {
      discrete_spec("walker", 60.0, {{45.0, 25.0}}, {-1.34, 0.0}, 0.5),
      density_spec("crowd", {{25.0, 20.0}, {35.0, 30.0}}, 2.0, {1.34, 0.0},
                   0.5)};
  cfg.interactions = {ar_spec("crowd", "crowd", 0.03, 1.5, 3.0),
                      r_spec("walker", "crowd", 0.03, cross_repel_radius),
                      r_spec("crowd", "walker", 0.03, cross_repel_radius)};
  return cfg;
}

ScenarioConfig two_intruders_config(double separation) {
  ScenarioConfig cfg = intrusion_config(4.0);
  cfg.populations[0] = discrete_spec(
      "walkers", 60.0,
      {{45.0, 25.0 - separation / 2.0}, {45.0, 25.0 + separation / 2.0}},
      {-1.34, 0.0}, 0.5);
  cfg.interactions = {ar_spec("crowd", "crowd", 0.03, 1.5, 3.0),
                      ar_spec("walkers", "walkers", 0.03, 1.5, 3.0),
                      r_spec("walkers", "crowd", 0.03, 4.0),
                      r_spec("crowd", "walkers", 0.03, 4.0)};
  return cfg;
}

ScenarioConfig leader_config(double strength, double attract_radius) {
  ScenarioConfig cfg;
  cfg.steps = 1400;
  // The leader's lane y = 24 stays clear of the cell-midpoint rows of all
  // grids used in the mesh-refinement comparison (50, 75 and 100 cells);
  // riding a midpoint row traps mass on the symmetry line against the
  // 1/s kernel growth.
  cfg.populations = {
      discrete_spec("leader", 60.0, {{31.0, 24.0}}, {-1.34, 0.0}, 1.0),
      density_spec("crowd", {{20.0, 20.0}, {30.0, 30.0}}, 2.0, {0.0, 0.0},
                   1.0)};
  // The leader influences the crowd but is not influenced back.
  cfg.interactions = {ar_spec("crowd", "crowd", 0.03, 1.5, 3.0),
                      ar_spec("leader", "crowd", strength, 1.5, attract_radius)};
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"approach",  "blob",      "intrusion",
          "intrusion-narrow", "two-close", "two-apart",
          "leader",    "leader-strong", "leader-wide"};
}

ScenarioConfig preset(const std::string& name) {
  if (name == "approach") {
    ScenarioConfig cfg;
    cfg.steps = 1500;
    cfg.populations = {
        discrete_spec("left", 1.0, {{20.0, 25.0}}, {1.34, 0.0}, 1.0),
        discrete_spec("right", 1.0, {{30.0, 25.0}}, {-1.34, 0.0}, 1.0)};
    cfg.interactions = {r_spec("left", "right", 1.0, 4.0),
                        r_spec("right", "left", 1.0, 4.0)};
    return cfg;
  }
  if (name == "blob") {
    ScenarioConfig cfg;
    cfg.steps = 6000;
    cfg.populations = {density_spec("crowd", {{20.0, 20.0}, {30.0, 30.0}}, 2.0,
                                    {0.0, 0.0}, 1.0)};
    cfg.interactions = {ar_spec("crowd", "crowd", 0.03, 1.5, 3.0)};
    return cfg;
  }
  if (name == "intrusion") return intrusion_config(4.0);
  if (name == "intrusion-narrow") return intrusion_config(2.0);
  if (name == "two-close") return two_intruders_config(1.5);
  if (name == "two-apart") return two_intruders_config(3.2);
  if (name == "leader") return leader_config(0.03, 3.0);
  if (name == "leader-strong") return leader_config(0.3, 3.0);
  if (name == "leader-wide") return leader_config(0.03, 6.0);
  throw std::invalid_argument("unknown preset '" + name + "'");
}

SimState make_initial_state(const ScenarioConfig& cfg) {
  SimState state;
  state.grid = Grid(cfg.length, cfg.width, cfg.nx, cfg.ny);
  state.dt = cfg.dt;
  state.interactions =
      InteractionTable(static_cast<int>(cfg.populations.size()));

  for (const auto& spec : cfg.populations) {
    Population p;
    p.id = spec.id;
    p.desired_velocity = spec.vdes;
    p.anisotropy = Anisotropy(spec.sigma);
    if (spec.kind == PopulationSpec::Kind::Discrete) {
      p.measure = DiscreteMeasure{spec.weight, spec.positions};
    } else {
      DensityField field(state.grid);
      const double cell_area = state.grid.hx() * state.grid.hy();
      for (int k = 1; k <= state.grid.ny(); ++k)
        for (int j = 1; j <= state.grid.nx(); ++j) {
          const double a =
              overlap_area(state.grid.cell_rect(CellIndex{j, k}), spec.block);
          if (a > 0.0) field(CellIndex{j, k}) = spec.rho * (a / cell_area);
        }
      p.measure = std::move(field);
    }
    state.populations.push_back(std::move(p));
  }

  for (const auto& it : cfg.interactions) {
    const int observer = state.index_of(it.dst);
    const int source = state.index_of(it.src);
    const InteractionKernel k =
        it.kind == KernelKind::AttractRepel
            ? InteractionKernel::attract_repel(it.strength, it.repel_radius,
                                               it.attract_radius)
            : InteractionKernel::repel_only(it.strength, it.repel_radius);
    state.interactions.set(observer, source, k);
  }
  return state;
}

namespace {

void write_density_frame(const std::filesystem::path& dir,
                         const Population& pop, int step_index, double time) {
  const DensityField& field = pop.density();
  const Grid& g = field.grid();
  char name[128];
  std::snprintf(name, sizeof(name), "density_%s_%06d.txt", pop.id.c_str(),
                step_index);
  std::ofstream out(dir / name);
  out << "# t=" << format_shortest(time) << " nx=" << g.nx()
      << " ny=" << g.ny() << " pop=" << pop.id << "\n";
  for (int k = 1; k <= g.ny(); ++k) {
    for (int j = 1; j <= g.nx(); ++j) {
      if (j > 1) out << ' ';
      out << format_shortest(field(CellIndex{j, k}));
    }
    out << '\n';
  }
}

void write_density_pgm(const std::filesystem::path& dir, const Population& pop,
                       int step_index, double scale) {
  const DensityField& field = pop.density();
  const Grid& g = field.grid();
  char name[128];
  std::snprintf(name, sizeof(name), "density_%s_%06d.pgm", pop.id.c_str(),
                step_index);
  std::ofstream out(dir / name, std::ios::binary);
  out << "P5\n" << g.nx() << " " << g.ny() << "\n255\n";
  for (int k = 1; k <= g.ny(); ++k)
    for (int j = 1; j <= g.nx(); ++j) {
      const double rho = field(CellIndex{j, k});
      const double v = scale > 0.0 ? std::min(rho / scale, 1.0) : 0.0;
      out.put(static_cast<char>(
          static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

void write_particle_rows(std::ofstream& out, const SimState& state) {
  for (const auto& pop : state.populations) {
    if (!pop.is_discrete()) continue;
    const auto& centers = pop.discrete().centers;
    for (std::size_t i = 0; i < centers.size(); ++i)
      out << state.step_index << ',' << format_shortest(state.time) << ','
          << pop.id << ',' << i << ',' << format_shortest(centers[i].x) << ','
          << format_shortest(centers[i].y) << '\n';
  }
}

void write_diagnostics_rows(std::ofstream& out, const SimState& state,
                            const std::vector<double>& boundary_loss,
                            std::optional<double> entropy_value) {
  const double min_dist = min_pairwise_distance(state);
  for (std::size_t a = 0; a < state.populations.size(); ++a) {
    const Population& pop = state.populations[a];
    out << state.step_index << ',' << format_shortest(state.time) << ','
        << pop.id << ',' << format_shortest(total_mass(pop)) << ',';
    if (!pop.is_discrete()) out << format_shortest(pop.density().max_value());
    out << ',';
    if (std::isfinite(min_dist)) out << format_shortest(min_dist);
    out << ',';
    if (entropy_value) out << format_shortest(*entropy_value);
    out << ',' << format_shortest(boundary_loss[a]) << '\n';
  }
}

}  // namespace

RunSummary run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
               const RunOptions& options) {
  RunSummary summary;
  std::filesystem::create_directories(out_dir);

  SimState state = make_initial_state(cfg);
  const StepOptions step_options{cfg.allow_boundary_loss
                                     ? BoundaryPolicy::AllowLoss
                                     : BoundaryPolicy::Error};

  const EntropyConfig entropy_cfg = EntropyConfig::build(state);
  const bool entropy_open = entropy_cfg.valid();

  {
    std::ofstream cfg_echo(out_dir / "config.ini");
    cfg_echo << write_config(cfg);
  }

  double pgm_scale = options.pgm_scale.value_or(0.0);
  if (!options.pgm_scale) {
    for (const auto& p : state.populations)
      if (!p.is_discrete())
        pgm_scale = std::max(pgm_scale, p.density().max_value());
  }

  std::ofstream particles(out_dir / "particles.csv");
  particles << "step,t,pop,particle,x,y\n";
  std::ofstream diagnostics(out_dir / "diagnostics.csv");
  diagnostics << "step,t,pop,mass,max_density,min_pair_dist,entropy,"
                 "boundary_loss\n";

  std::vector<double> entropy_trace;
  const auto state_entropy = [&]() -> std::optional<double> {
    if (!entropy_open) return std::nullopt;
    const double s = entropy(state, entropy_cfg);
    entropy_trace.push_back(s);
    return s;
  };

  const auto emit_frame = [&]() {
    for (const auto& pop : state.populations) {
      if (pop.is_discrete()) continue;
      write_density_frame(out_dir, pop, state.step_index, state.time);
      if (options.write_pgm)
        write_density_pgm(out_dir, pop, state.step_index, pgm_scale);
    }
    write_particle_rows(particles, state);
  };

  std::vector<double> zero_loss(state.populations.size(), 0.0);
  write_diagnostics_rows(diagnostics, state, zero_loss, state_entropy());
  emit_frame();

  bool cfl_reported = false;
  for (int n = 1; n <= cfg.steps; ++n) {
    try {
      auto [next, report] = step(state, step_options);
      state = std::move(next);
      if (report.cfl_advisory && !cfl_reported) {
        cfl_reported = true;
        std::fprintf(stderr,
                     "advisory: step %d moves mass farther than one cell "
                     "(dt*max|v| > min cell size)\n",
                     n);
      }
      std::vector<double> losses;
      for (const auto& pr : report.populations)
        losses.push_back(pr.boundary_loss);
      const double min_dist = min_pairwise_distance(state);
      if (min_dist <= kMergeGuardEpsilon) {
        summary.exit_status = 1;
        summary.error = "merge guard: particle centers closer than " +
                        format_shortest(kMergeGuardEpsilon) + " after step " +
                        std::to_string(n);
        write_diagnostics_rows(diagnostics, state, losses, state_entropy());
        return summary;
      }
      write_diagnostics_rows(diagnostics, state, losses, state_entropy());
      if (n % cfg.frame_stride == 0) emit_frame();
      summary.steps_completed = n;
    } catch (const BoundaryLossError& e) {
      summary.exit_status = 1;
      summary.error = "step " + std::to_string(n) + ": " + e.what();
      return summary;
    } catch (const MergeGuardError& e) {
      summary.exit_status = 1;
      summary.error = "step " + std::to_string(n) + ": " + e.what();
      return summary;
    }
  }

  if (cfg.entropy_audit && entropy_open && entropy_trace.size() > 1) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < entropy_trace.size(); ++i)
      worst = std::min(worst, entropy_trace[i + 1] - entropy_trace[i]);

    // Rerun at half the step size for the quadratic-deficit check.
    SimState halved = make_initial_state(cfg);
    halved.dt = cfg.dt / 2.0;
    double worst_half = std::numeric_limits<double>::infinity();
    double prev = entropy(halved, entropy_cfg);
    for (int n = 0; n < 2 * cfg.steps; ++n) {
      auto [next, report] = step(halved, step_options);
      halved = std::move(next);
      const double s = entropy(halved, entropy_cfg);
      worst_half = std::min(worst_half, s - prev);
      prev = s;
    }

    std::ofstream audit(out_dir / "entropy_audit.txt");
    audit << "initial_entropy = " << format_shortest(entropy_trace.front())
          << "\n";
    audit << "final_entropy = " << format_shortest(entropy_trace.back())
          << "\n";
    audit << "worst_step_change = " << format_shortest(worst) << "\n";
    audit << "worst_step_change_half_dt = " << format_shortest(worst_half)
          << "\n";
    audit << "empirical_deficit_constant = "
          << format_shortest(std::max(0.0, -worst) / (cfg.dt * cfg.dt))
          << "\n";
  } else if (cfg.entropy_audit && !entropy_open) {
    std::fprintf(stderr, "entropy audit skipped: %s\n",
                 entropy_cfg.invalid_reason().c_str());
  }
  return summary;
}

namespace {

struct DiagnosticsRow {
  int step = 0;
  std::string pop;
  double mass = 0.0;
  std::optional<double> entropy_value;
  double boundary_loss = 0.0;
};

std::vector<DiagnosticsRow> read_diagnostics(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in)
    throw std::runtime_error("cannot open '" + file.string() + "'");
  std::vector<DiagnosticsRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    DiagnosticsRow row;
    std::getline(ss, field, ',');
    row.step = std::stoi(field);
    std::getline(ss, field, ',');  // t
    std::getline(ss, row.pop, ',');
    std::getline(ss, field, ',');
    row.mass = std::stod(field);
    std::getline(ss, field, ',');  // max_density
    std::getline(ss, field, ',');  // min_pair_dist
    std::getline(ss, field, ',');
    if (!field.empty()) row.entropy_value = std::stod(field);
    std::getline(ss, field, ',');
    row.boundary_loss = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

AuditSummary audit_output_dir(const std::filesystem::path& dir) {
  AuditSummary out;
  std::ostringstream report;
  bool ok = true;

  ScenarioConfig cfg;
  try {
    cfg = load_config(dir / "config.ini");
  } catch (const std::exception& e) {
    out.report = std::string("audit failed: ") + e.what();
    return out;
  }
  const double cell_area = (cfg.length / cfg.nx) * (cfg.width / cfg.ny);

  std::vector<DiagnosticsRow> rows;
  try {
    rows = read_diagnostics(dir / "diagnostics.csv");
  } catch (const std::exception& e) {
    out.report = std::string("audit failed: ") + e.what();
    return out;
  }

  // Conservation: mass plus accumulated boundary loss stays at the initial
  // mass, per population.
  std::map<std::string, double> initial_mass;
  std::map<std::string, double> accumulated_loss;
  double worst_drift = 0.0;
  for (const auto& row : rows) {
    if (!initial_mass.count(row.pop)) {
      initial_mass[row.pop] = row.mass;
      accumulated_loss[row.pop] = 0.0;
    }
    accumulated_loss[row.pop] += row.boundary_loss;
    const double m0 = initial_mass[row.pop];
    if (m0 > 0.0) {
      const double drift =
          std::abs(row.mass + accumulated_loss[row.pop] - m0) / m0;
      worst_drift = std::max(worst_drift, drift);
      if (drift > 1e-12) {
        ok = false;
        report << "FAIL conservation: population '" << row.pop << "' at step "
               << row.step << " drifted by " << drift << " (relative)\n";
      }
    }
  }
  report << "worst relative mass drift: " << worst_drift << "\n";

  // Frame files: recomputed mass must match the diagnostics row.
  int frames_checked = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("density_", 0) != 0 || entry.path().extension() != ".txt")
      continue;
    std::ifstream in(entry.path());
    std::string header;
    std::getline(in, header);
    const auto pop_at = header.find("pop=");
    const std::string pop = pop_at == std::string::npos
                                ? std::string()
                                : header.substr(pop_at + 4);
    const int step_index = std::stoi(
        name.substr(name.size() - 10, 6));  // density_<pop>_NNNNNN.txt
    NeumaierSum mass;
    double v = 0.0;
    bool negative = false;
    while (in >> v) {
      mass.add(v);
      if (v < 0.0) negative = true;
    }
    const double frame_mass = mass.value() * cell_area;
    if (negative) {
      ok = false;
      report << "FAIL positivity: negative density in " << name << "\n";
    }
    bool matched = false;
    for (const auto& row : rows)
      if (row.step == step_index && row.pop == pop) {
        const double ref = row.mass;
        const double err =
            ref > 0.0 ? std::abs(frame_mass - ref) / ref : std::abs(frame_mass);
        if (err > 1e-12) {
          ok = false;
          report << "FAIL frame mass: " << name << " recomputes to "
                 << frame_mass << " but diagnostics says " << ref << "\n";
        }
        matched = true;
        break;
      }
    if (!matched) {
      ok = false;
      report << "FAIL: no diagnostics row for frame " << name << "\n";
    }
    ++frames_checked;
  }
  report << "frames checked: " << frames_checked << "\n";

  // Entropy column, when present: report the worst per-step change.
  std::map<std::string, std::vector<std::pair<int, double>>> entropy_by_pop;
  for (const auto& row : rows)
    if (row.entropy_value)
      entropy_by_pop[row.pop].push_back({row.step, *row.entropy_value});
  if (!entropy_by_pop.empty()) {
    const auto& trace = entropy_by_pop.begin()->second;
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < trace.size(); ++i)
      worst = std::min(worst, trace[i + 1].second - trace[i].second);
    report << "worst per-step entropy change: " << worst << "\n";
  }

  out.ok = ok;
  report << (ok ? "audit OK\n" : "audit FAILED\n");
  out.report = report.str();
  return out;
}

}  // namespace crowdsim
