#include "distort/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "distort/error.hpp"

namespace distort::io {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(std::string("distortion field '") + key + "' missing or not a number");
  }
  return j.at(key).get<double>();
}

json to_json(const DistortionSpec& d) {
  json j;
  j["family"] = std::string(d.name());
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, DistortionSpec::Power> || std::is_same_v<F, DistortionSpec::KahnemanTversky>) {
          j["gamma"] = f.gamma;
        } else if constexpr (std::is_same_v<F, DistortionSpec::TverskyFox> ||
                             std::is_same_v<F, DistortionSpec::Prelec>) {
          j["alpha"] = f.alpha;
          j["gamma"] = f.gamma;
        } else if constexpr (std::is_same_v<F, DistortionSpec::Wang>) {
          j["alpha"] = f.alpha;
        } else if constexpr (std::is_same_v<F, DistortionSpec::Separable>) {
          static constexpr const char* kinds[] = {"constant", "linear", "exponential"};
          j["weight"] = {{"kind", kinds[static_cast<int>(f.weight.kind)]},
                         {"a", f.weight.a},
                         {"b", f.weight.b},
                         {"k", f.weight.k}};
          j["base"] = to_json(*f.base);
          j["horizon"] = f.horizon;
        }
      },
      d.family());
  return j;
}

DistortionSpec from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
    throw ConfigError("distortion needs a string 'family'");
  }
  const auto fam = j.at("family").get<std::string>();
  if (fam == "identity") return DistortionSpec::identity();
  if (fam == "power") return DistortionSpec::power(number(j, "gamma"));
  if (fam == "kahneman_tversky") return DistortionSpec::kahneman_tversky(number(j, "gamma"));
  if (fam == "tversky_fox") return DistortionSpec::tversky_fox(number(j, "alpha"), number(j, "gamma"));
  if (fam == "prelec") return DistortionSpec::prelec(number(j, "gamma"), number(j, "alpha"));
  if (fam == "wang") return DistortionSpec::wang(number(j, "alpha"));
  if (fam == "separable") {
    if (!j.contains("weight") || !j.contains("base")) throw ConfigError("separable distortion needs weight and base");
    const json& w = j.at("weight");
    TimeWeight tw;
    const auto kind = w.value("kind", std::string("constant"));
    if (kind == "constant") {
      tw.kind = TimeWeight::Kind::Constant;
    } else if (kind == "linear") {
      tw.kind = TimeWeight::Kind::Linear;
    } else if (kind == "exponential") {
      tw.kind = TimeWeight::Kind::Exponential;
    } else {
      throw ConfigError("unknown time weight kind '" + kind + "'");
    }
    tw.a = w.value("a", 1.0);
    tw.b = w.value("b", 0.0);
    tw.k = w.value("k", 0.0);
    return DistortionSpec::separable(tw, from_json(j.at("base")), number(j, "horizon"));
  }
  throw ConfigError("unknown distortion family '" + fam + "'");
}

template <class T>
void put(std::ostream& os, T v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u;
  std::memcpy(&u, &v, sizeof u);
  unsigned char b[sizeof u];
  for (std::size_t i = 0; i < sizeof u; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <class T>
T get(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof b)) throw ConfigError("truncated field file");
  U u = 0;
  for (std::size_t i = 0; i < sizeof u; ++i) u |= static_cast<U>(b[i]) << (8 * i);
  T v;
  std::memcpy(&v, &u, sizeof v);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string distortion_to_json(const DistortionSpec& d) { return to_json(d).dump(); }

DistortionSpec distortion_from_json(std::string_view text) {
  try {
    return from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("distortion JSON: ") + e.what());
  }
}

std::string tree_to_json(const TreeModel& tree) {
  json j;
  j["times"] = tree.times();
  json states = json::array(), up = json::array();
  for (std::size_t i = 0; i <= tree.periods(); ++i) {
    const auto l = tree.states().level(i);
    states.push_back(std::vector<double>(l.begin(), l.end()));
    if (i < tree.periods()) {
      const auto u = tree.up_probs().level(i);
      up.push_back(std::vector<double>(u.begin(), u.end()));
    }
  }
  j["states"] = states;
  j["up_prob"] = up;
  return j.dump();
}

TreeModel tree_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto times = j.at("times").get<std::vector<double>>();
    const auto states = j.at("states").get<std::vector<std::vector<double>>>();
    const auto up = j.at("up_prob").get<std::vector<std::vector<double>>>();
    if (times.empty() || states.size() != times.size() || up.size() + 1 != times.size()) {
      throw ConfigError("tree needs N+1 times, N+1 state levels and N probability levels");
    }
    Ragged<double> S(states.size()), U(up.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
      if (states[i].size() != i + 1) throw ConfigError("state level " + std::to_string(i) + " needs " + std::to_string(i + 1) + " entries");
      std::copy(states[i].begin(), states[i].end(), S.level(i).begin());
    }
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (up[i].size() != i + 1) throw ConfigError("up_prob level " + std::to_string(i) + " needs " + std::to_string(i + 1) + " entries");
      std::copy(up[i].begin(), up[i].end(), U.level(i).begin());
    }
    return TreeModel(times, std::move(S), std::move(U));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("tree JSON: ") + e.what());
  }
}

void write_field_csv(const std::filesystem::path& path, const DensityField& field) {
  auto f = open_out(path);
  f << "t,x,rho,G\n";
  for (std::size_t it = 0; it < field.nt(); ++it) {
    for (std::size_t ix = 0; ix < field.nx(); ++ix) {
      f << format_double(field.t_grid()[it]) << ',' << format_double(field.x_grid()[ix]) << ','
        << format_double(field.rho_at(it, ix)) << ',' << format_double(field.G_at(it, ix).p) << '\n';
    }
  }
}

void write_field_binary(const std::filesystem::path& path, const DensityField& field) {
  auto f = open_out(path, true);
  f.write("DSTF", 4);
  put<std::uint32_t>(f, 1);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(field.nt()));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(field.nx()));
  put<double>(f, field.reliable_tail());
  for (double t : field.t_grid()) put(f, t);
  for (double x : field.x_grid()) put(f, x);
  for (double r : field.rho_values()) put(f, r);
  for (const Prob& g : field.G_values()) put(f, g.p);
  for (const Prob& g : field.G_values()) put(f, g.comp);
}

DensityField read_field_binary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "DSTF", 4) != 0) throw ConfigError(path.string() + " is not a field file");
  const auto version = get<std::uint32_t>(f);
  if (version != 1) throw ConfigError("unsupported field file version " + std::to_string(version));
  const std::size_t nt = get<std::uint32_t>(f), nx = get<std::uint32_t>(f);
  const double tail = get<double>(f);
  std::vector<double> t(nt), x(nx), rho(nt * nx);
  std::vector<Prob> G(nt * nx);
  for (auto& v : t) v = get<double>(f);
  for (auto& v : x) v = get<double>(f);
  for (auto& v : rho) v = get<double>(f);
  for (auto& g : G) g.p = get<double>(f);
  for (auto& g : G) g.comp = get<double>(f);
  return DensityField(std::move(t), std::move(x), std::move(rho), std::move(G), tail);
}

void write_drift_csv(const std::filesystem::path& path, const DriftField& mu) {
  auto f = open_out(path);
  f << "t,x,mu\n";
  for (std::size_t it = 0; it < mu.t_grid.size(); ++it) {
    for (std::size_t ix = 0; ix < mu.x_grid.size(); ++ix) {
      f << format_double(mu.t_grid[it]) << ',' << format_double(mu.x_grid[ix]) << ',' << format_double(mu.at(it, ix))
        << '\n';
    }
  }
}

void write_pde_csv(const std::filesystem::path& path, const PDESolution& sol) {
  auto f = open_out(path);
  f << "s,x,u\n";
  for (std::size_t is = 0; is < sol.s_grid.size(); ++is) {
    const auto u = sol.slice(is);
    for (std::size_t ix = 0; ix < sol.x_grid.size(); ++ix) {
      f << format_double(sol.s_grid[is]) << ',' << format_double(sol.x_grid[ix]) << ',' << format_double(u[ix]) << '\n';
    }
  }
}

void write_phi_csv(const std::filesystem::path& path, const PhiCurve& curve) {
  auto f = open_out(path);
  f << "p,phi\n";
  for (std::size_t i = 0; i < curve.p.size(); ++i) f << format_double(curve.p[i]) << ',' << format_double(curve.phi[i]) << '\n';
}

std::string phi_metadata_json(const PhiCurve& curve, const DistortionSpec& d) {
  json j;
  j["s"] = curve.s;
  j["t"] = curve.t;
  j["x"] = curve.x;
  j["family"] = curve.family;
  j["params"] = to_json(d);
  j["method"] = curve.method;
  j["increasing"] = curve.increasing;
  return j.dump(2);
}

}  // namespace distort::io
