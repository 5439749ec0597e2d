#include "mpmlite/config.hpp"

#include "mpmlite/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace mpmlite {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Line numbers of "section.key" entries for error messages.
std::map<std::string, int> index_lines(const std::string& text) {
  std::map<std::string, int> lines;
  std::istringstream in(text);
  std::string line, section;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      lines[section] = n;
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos) lines[section + "\x1f" + trim(t.substr(0, eq))] = n;
  }
  return lines;
}

class Reader {
 public:
  Reader(std::string origin, std::map<std::string, int> lines) : origin_(std::move(origin)), lines_(std::move(lines)) {}

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const {
    std::ostringstream os;
    os << origin_;
    auto it = lines_.find(key.empty() ? section : section + "\x1f" + key);
    if (it != lines_.end()) os << ":" << it->second;
    os << ": [" << section << "]";
    if (!key.empty()) os << " " << key;
    os << ": " << msg;
    throw ConfigError(os.str());
  }

  struct Section {
    const Reader* reader;
    std::string name;
    const pt::ptree* tree;
    mutable std::set<std::string> used;

    bool has(const std::string& key) const {
      used.insert(key);
      return tree && tree->find(key) != tree->not_found();
    }
    std::string raw(const std::string& key) const {
      used.insert(key);
      return trim(tree->get<std::string>(key));
    }
    std::string str(const std::string& key, const std::string& def) const {
      return has(key) ? lower(raw(key)) : def;
    }
    double num(const std::string& key, double def) const { return has(key) ? to_double(key, raw(key)) : def; }
    double num_required(const std::string& key) const {
      if (!has(key)) reader->fail(name, key, "missing required key");
      return to_double(key, raw(key));
    }
    long long integer(const std::string& key, long long def) const {
      if (!has(key)) return def;
      const std::string v = raw(key);
      try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
      } catch (const std::exception&) {
        reader->fail(name, key, "expected an integer, got '" + v + "'");
      }
    }
    unsigned long long unsigned_integer(const std::string& key, unsigned long long def) const {
      if (!has(key)) return def;
      const std::string v = raw(key);
      try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
      } catch (const std::exception&) {
        reader->fail(name, key, "expected a non-negative integer, got '" + v + "'");
      }
    }
    bool boolean(const std::string& key, bool def) const {
      if (!has(key)) return def;
      const std::string v = lower(raw(key));
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      reader->fail(name, key, "expected a boolean, got '" + v + "'");
    }
    std::vector<double> list(const std::string& key) const {
      std::string v = raw(key);
      std::replace(v.begin(), v.end(), ',', ' ');
      std::istringstream in(v);
      std::vector<double> out;
      std::string tok;
      while (in >> tok) out.push_back(to_double(key, tok));
      return out;
    }
    template <int dim>
    Vec<dim> vec(const std::string& key, const Vec<dim>& def) const {
      if (!has(key)) return def;
      const std::vector<double> l = list(key);
      if (static_cast<int>(l.size()) != dim)
        reader->fail(name, key, "expected " + std::to_string(dim) + " components, got " + std::to_string(l.size()));
      Vec<dim> out;
      for (int a = 0; a < dim; ++a) out[a] = l[static_cast<std::size_t>(a)];
      return out;
    }
    void check_unknown() const {
      if (!tree) return;
      for (const auto& kv : *tree)
        if (!used.count(kv.first)) reader->fail(name, kv.first, "unknown key");
    }

   private:
    double to_double(const std::string& key, const std::string& v) const {
      try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
      } catch (const std::exception&) {
        reader->fail(name, key, "expected a number, got '" + v + "'");
      }
    }
  };

  Section section(const pt::ptree& root, const std::string& name) const {
    auto it = root.find(name);
    return Section{this, name, it == root.not_found() ? nullptr : &it->second, {}};
  }

 private:
  std::string origin_;
  std::map<std::string, int> lines_;
};

// Indexed sections "prefix.N" sorted by N.
std::vector<std::pair<int, std::string>> indexed_sections(const pt::ptree& root, const std::string& prefix,
                                                          const Reader& rd) {
  std::vector<std::pair<int, std::string>> out;
  for (const auto& kv : root) {
    const std::string& name = kv.first;
    if (name.rfind(prefix + ".", 0) != 0) continue;
    const std::string idx = name.substr(prefix.size() + 1);
    if (idx.empty() || !std::all_of(idx.begin(), idx.end(), [](unsigned char c) { return std::isdigit(c); }))
      rd.fail(name, "", "section index must be a non-negative integer");
    out.emplace_back(std::stoi(idx), name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

BoundaryCondition parse_condition(const Reader::Section& s, const std::string& key, const std::string& v,
                                  const Reader& rd) {
  if (v == "sticky") return BoundaryCondition::Sticky;
  if (v == "slip") return BoundaryCondition::Slip;
  rd.fail(s.name, key, "expected sticky or slip, got '" + v + "'");
}

template <int dim>
SceneConfig<dim> build_scene(const pt::ptree& root, const Reader& rd, OutputConfig& output) {
  SceneConfig<dim> cfg;
  static const std::set<std::string> known = {"grid", "solver", "output"};
  for (const auto& kv : root) {
    const std::string& n = kv.first;
    if (known.count(n) || n.rfind("material.", 0) == 0 || n.rfind("shape.", 0) == 0 || n.rfind("collider.", 0) == 0)
      continue;
    rd.fail(n, "", "unknown section");
  }

  {
    auto g = rd.section(root, "grid");
    g.has("dimension");
    cfg.grid.dx = g.num_required("dx");
    if (!g.has("dims")) rd.fail("grid", "dims", "missing required key");
    const std::vector<double> dims = g.list("dims");
    if (dims.size() == 1) {
      cfg.grid.dims.setConstant(static_cast<int>(dims[0]));
    } else if (static_cast<int>(dims.size()) == dim) {
      for (int a = 0; a < dim; ++a) cfg.grid.dims[a] = static_cast<int>(dims[static_cast<std::size_t>(a)]);
    } else {
      rd.fail("grid", "dims", "expected 1 or " + std::to_string(dim) + " values");
    }
    cfg.grid.origin = g.template vec<dim>("origin", Vec<dim>::Zero());
    cfg.gravity = g.template vec<dim>("gravity", Vec<dim>::Zero());
    const std::string b = g.str("boundary", "none");
    if (b != "none") cfg.boundary = parse_condition(g, "boundary", b, rd);
    cfg.boundary_cells = static_cast<int>(g.integer("boundary_cells", 2));
    const std::string storage = g.str("storage", "sparse");
    if (storage == "sparse")
      cfg.storage = LatticeStorage::Sparse;
    else if (storage == "dense")
      cfg.storage = LatticeStorage::Dense;
    else
      rd.fail("grid", "storage", "expected sparse or dense");
    g.check_unknown();
  }

  {
    auto s = rd.section(root, "solver");
    const std::string integ = s.str("integrator", "explicit");
    if (integ == "explicit")
      cfg.integrator = IntegratorKind::Explicit;
    else if (integ == "implicit")
      cfg.integrator = IntegratorKind::Implicit;
    else
      rd.fail("solver", "integrator", "expected explicit or implicit");
    cfg.dt_step = s.num("dt_step", cfg.dt_step);
    cfg.dt_frame = s.num("dt_frame", cfg.dt_frame);
    cfg.frames = static_cast<int>(s.integer("frames", cfg.frames));
    if (s.has("flip_blend")) cfg.flip_blend = s.num("flip_blend", 0.95);
    cfg.deterministic = s.boolean("deterministic", false);
    cfg.seed = s.unsigned_integer("seed", 0);
    SolverConfig& sc = cfg.solver;
    sc.newton_max_iters = static_cast<int>(s.integer("newton_max_iters", sc.newton_max_iters));
    sc.newton_tol = s.num("newton_tol", sc.newton_tol);
    sc.newton_abs_tol = s.num("newton_abs_tol", sc.newton_abs_tol);
    sc.pcg_max_iters = static_cast<int>(s.integer("pcg_max_iters", sc.pcg_max_iters));
    sc.pcg_tol = s.num("pcg_tol", sc.pcg_tol);
    sc.psd_projection = s.boolean("psd_projection", sc.psd_projection);
    sc.fixed_point_plasticity = s.boolean("fixed_point_plasticity", sc.fixed_point_plasticity);
    sc.line_search = s.boolean("line_search", sc.line_search);
    sc.cfl = s.num("cfl", sc.cfl);
    s.check_unknown();
  }

  {
    auto o = rd.section(root, "output");
    if (o.has("dir")) output.dir = o.raw("dir");
    const std::string st = o.str("stats", "csv");
    if (st == "csv")
      output.stats = StatsMode::Csv;
    else if (st == "off")
      output.stats = StatsMode::Off;
    else
      rd.fail("output", "stats", "expected csv or off");
    output.velocities = o.boolean("velocities", output.velocities);
    output.volume_ratio = o.boolean("volume_ratio", output.volume_ratio);
    output.material_ids = o.boolean("material_ids", output.material_ids);
    o.check_unknown();
  }

  const auto mats = indexed_sections(root, "material", rd);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    if (mats[k].first != static_cast<int>(k))
      rd.fail(mats[k].second, "", "material sections must be numbered 0, 1, 2, ... without gaps");
    auto m = rd.section(root, mats[k].second);
    const std::string model = m.str("model", "stvk_hencky");
    const double density = m.num("density", 1000.0);
    MaterialModel mm;
    const auto moduli = [&](double& mu, double& lambda) {
      if (m.has("youngs") || m.has("poisson")) {
        const double E = m.num_required("youngs"), nu = m.num_required("poisson");
        mu = E / (2.0 * (1.0 + nu));
        lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
      } else {
        mu = m.num_required("mu");
        lambda = m.num_required("lambda");
      }
    };
    if (model == "stvk_hencky") {
      mm.kind = EnergyKind::StvkHencky;
      moduli(mm.mu, mm.lambda);
    } else if (model == "split_neo_hookean") {
      mm.kind = EnergyKind::SplitNeoHookean;
      if (m.has("bulk")) {
        mm.mu = m.num_required("mu");
        mm.bulk = m.num_required("bulk");
        mm.lambda = mm.bulk - 2.0 * mm.mu / dim;
      } else {
        moduli(mm.mu, mm.lambda);
        mm.bulk = mm.lambda + 2.0 * mm.mu / dim;
      }
    } else if (model == "water") {
      mm.kind = EnergyKind::WaterJ;
      mm.bulk = m.num_required("bulk");
    } else {
      rd.fail(m.name, "model", "expected stvk_hencky, split_neo_hookean or water");
    }
    mm.density = density;
    const std::string plast = m.str("plasticity", "none");
    if (plast == "none") {
      mm.plasticity = PlasticityKind::None;
    } else if (plast == "von_mises") {
      mm.plasticity = PlasticityKind::VonMises;
      mm.yield_stress = m.num_required("yield_stress");
    } else if (plast == "drucker_prager") {
      mm.plasticity = PlasticityKind::DruckerPrager;
      mm.friction_angle_deg = m.num_required("friction_angle");
    } else {
      rd.fail(m.name, "plasticity", "expected none, von_mises or drucker_prager");
    }
    m.check_unknown();
    try {
      mm.validate(dim);
    } catch (const ConfigError& e) {
      rd.fail(m.name, "", e.what());
    }
    cfg.materials.push_back(mm);
  }

  for (const auto& [idx, name] : indexed_sections(root, "shape", rd)) {
    auto s = rd.section(root, name);
    Shape<dim> sh;
    const std::string kind = s.str("kind", "box");
    if (kind == "box") {
      sh.kind = ShapeKind::Box;
      if (!s.has("lo") || !s.has("hi")) rd.fail(name, "", "box shapes need lo and hi");
      sh.lo = s.template vec<dim>("lo", sh.lo);
      sh.hi = s.template vec<dim>("hi", sh.hi);
      sh.center = 0.5 * (sh.lo + sh.hi);
    } else if (kind == "sphere" || kind == "cylinder") {
      sh.kind = kind == "sphere" ? ShapeKind::Sphere : ShapeKind::Cylinder;
      if (!s.has("center")) rd.fail(name, "center", "missing required key");
      sh.center = s.template vec<dim>("center", sh.center);
      sh.radius = s.num_required("radius");
      if (sh.kind == ShapeKind::Cylinder) {
        sh.axis = static_cast<int>(s.integer("axis", 0));
        if (sh.axis < 0 || sh.axis >= dim) rd.fail(name, "axis", "axis out of range");
        sh.half_length = 0.5 * s.num_required("length");
      }
    } else {
      rd.fail(name, "kind", "expected box, sphere or cylinder");
    }
    if (s.has("spin_center")) sh.center = s.template vec<dim>("spin_center", sh.center);
    sh.material = static_cast<int>(s.integer("material", 0));
    sh.ppc = static_cast<int>(s.integer("ppc", 8));
    if (s.has("strata")) {
      const std::vector<double> l = s.list("strata");
      if (static_cast<int>(l.size()) != dim) rd.fail(name, "strata", "expected one count per axis");
      IVec<dim> st;
      for (int a = 0; a < dim; ++a) st[a] = static_cast<int>(l[static_cast<std::size_t>(a)]);
      sh.strata = st;
    }
    sh.jitter = s.num("jitter", 1.0);
    sh.velocity = s.template vec<dim>("velocity", Vec<dim>::Zero());
    if (s.has("angular_velocity")) {
      const std::vector<double> l = s.list("angular_velocity");
      if (dim == 2 && l.size() == 1)
        sh.angular_velocity = Eigen::Vector3d(0.0, 0.0, l[0]);
      else if (l.size() == 3)
        sh.angular_velocity = Eigen::Vector3d(l[0], l[1], l[2]);
      else
        rd.fail(name, "angular_velocity", dim == 2 ? "expected 1 value" : "expected 3 values");
    }
    s.check_unknown();
    cfg.shapes.push_back(sh);
  }

  for (const auto& [idx, name] : indexed_sections(root, "collider", rd)) {
    auto s = rd.section(root, name);
    Collider<dim> c;
    const std::string kind = s.str("kind", "half_space");
    if (kind == "half_space") {
      c.kind = ColliderKind::HalfSpace;
      c.point = s.template vec<dim>("point", c.point);
      c.normal = s.template vec<dim>("normal", c.normal);
    } else if (kind == "sphere") {
      c.kind = ColliderKind::Sphere;
      c.center = s.template vec<dim>("center", c.center);
      c.radius = s.num_required("radius");
    } else if (kind == "box") {
      c.kind = ColliderKind::Box;
      c.lo = s.template vec<dim>("lo", c.lo);
      c.hi = s.template vec<dim>("hi", c.hi);
    } else {
      rd.fail(name, "kind", "expected half_space, sphere or box");
    }
    c.condition = parse_condition(s, "condition", s.str("condition", "sticky"), rd);
    c.velocity = s.template vec<dim>("velocity", Vec<dim>::Zero());
    s.check_unknown();
    try {
      c.validate();
    } catch (const ConfigError& e) {
      rd.fail(name, "", e.what());
    }
    cfg.colliders.push_back(c);
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("invalid scene: ") + e.what());
  }
  return cfg;
}

}  // namespace

ParsedConfig parse_config_string(const std::string& text, const std::string& origin) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  const Reader rd(origin, index_lines(text));
  auto g = rd.section(root, "grid");
  if (!g.tree) rd.fail("grid", "", "missing [grid] section");
  const long long dim = g.integer("dimension", 3);
  ParsedConfig out;
  if (dim == 2)
    out.scene = build_scene<2>(root, rd, out.output);
  else if (dim == 3)
    out.scene = build_scene<3>(root, rd, out.output);
  else
    rd.fail("grid", "dimension", "expected 2 or 3");
  return out;
}

ParsedConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path.string());
}

}  // namespace mpmlite
