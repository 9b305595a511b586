#include "spinn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "spinn/errors.hpp"

namespace spinn {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void bad_value(const std::string& where, const std::string& value, const char* want) {
  throw ConfigError("config " + where + " = '" + value + "': expected " + want);
}

std::size_t parse_count(const std::string& where, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    bad_value(where, v, "a non-negative integer");
  }
  if (pos != v.size()) bad_value(where, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

double parse_real(const std::string& where, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_value(where, v, "a number");
  }
  if (pos != v.size()) bad_value(where, v, "a number");
  return x;
}

bool parse_flag(const std::string& where, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(where, v, "true or false");
}

std::vector<std::size_t> parse_list(const std::string& where, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) bad_value(where, v, "a comma-separated list of widths");
    out.push_back(parse_count(where, item.substr(b, e - b + 1)));
  }
  if (out.empty()) bad_value(where, v, "a comma-separated list of widths");
  return out;
}

using Setter = void (*)(TrainConfig&, const std::string& where, const std::string& value);

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"problem",
       {{"name", [](TrainConfig& c, const std::string&, const std::string& v) { c.problem = v; }},
        {"velocity_ic", [](TrainConfig& c, const std::string& w, const std::string& v) {
           c.velocity_ic = parse_flag(w, v);
         }}}},
      {"model",
       {{"arch",
         [](TrainConfig& c, const std::string& w, const std::string& v) {
           try {
             c.arch = parse_arch(v);
           } catch (const std::exception&) {
             bad_value(w, v, "spinn or pinn");
           }
         }},
        {"rank", [](TrainConfig& c, const std::string& w, const std::string& v) { c.rank = parse_count(w, v); }},
        {"hidden", [](TrainConfig& c, const std::string& w, const std::string& v) { c.hidden = parse_list(w, v); }}}},
      {"train",
       {{"n", [](TrainConfig& c, const std::string& w, const std::string& v) { c.n = parse_count(w, v); }},
        {"lr", [](TrainConfig& c, const std::string& w, const std::string& v) { c.lr = parse_real(w, v); }},
        {"iterations",
         [](TrainConfig& c, const std::string& w, const std::string& v) { c.iterations = parse_count(w, v); }},
        {"eval_every",
         [](TrainConfig& c, const std::string& w, const std::string& v) { c.eval_every = parse_count(w, v); }},
        {"seed", [](TrainConfig& c, const std::string& w, const std::string& v) { c.seed = parse_count(w, v); }},
        {"pde_loss",
         [](TrainConfig& c, const std::string& w, const std::string& v) {
           try {
             c.pde_loss = parse_pde_loss(v);
           } catch (const std::exception&) {
             bad_value(w, v, "auto, grid or factored");
           }
         }},
        {"fd_refine",
         [](TrainConfig& c, const std::string& w, const std::string& v) { c.fd_refine = parse_count(w, v); }}}},
      {"output",
       {{"dir", [](TrainConfig& c, const std::string&, const std::string& v) { c.output_dir = v; }}}},
  };
  return s;
}

}  // namespace

TrainConfig parse_config(std::istream& is, TrainConfig base) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [section, keys] : tree) {
    const auto sec = schema().find(section);
    if (sec == schema().end()) {
      if (keys.empty()) throw ConfigError("config key '" + section + "' must sit inside a [section]");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, node] : keys) {
      const std::string where = "[" + section + "] " + key;
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError("config " + where + ": unknown key");
      setter->second(base, where, node.data());
    }
  }
  return base;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return parse_config(is, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_env_overrides(TrainConfig& config) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) config.output_dir = dir;
}

std::string to_ini(const TrainConfig& c) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  std::string hidden;
  for (std::size_t w : c.resolved_hidden()) hidden += (hidden.empty() ? "" : ",") + std::to_string(w);
  os << "[problem]\nname = " << c.problem << "\nvelocity_ic = " << (c.velocity_ic ? "true" : "false")
     << "\n\n[model]\narch = " << arch_name(c.arch) << "\nrank = " << c.rank << "\nhidden = " << hidden
     << "\n\n[train]\nn = " << c.n << "\nlr = " << c.lr << "\niterations = " << c.iterations
     << "\neval_every = " << c.eval_every << "\nseed = " << c.seed
     << "\npde_loss = " << pde_loss_name(c.pde_loss) << "\nfd_refine = " << c.fd_refine
     << "\n\n[output]\ndir = " << c.output_dir << "\n";
  return os.str();
}

}  // namespace spinn
