#include "opbench/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "opbench/errors.hpp"
#include "opbench/io.hpp"

namespace opbench {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("empty list entry");
        out.push_back(item);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected a non-negative integer");
    return v;
}

double to_double(const std::string& s) {
    const double v = parse_double(s);
    if (!std::isfinite(v)) throw std::invalid_argument("expected a finite number");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true or false");
}

template <class T, class F>
std::vector<T> list_of(const std::string& s, F convert) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) out.push_back(convert(item));
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> s = {
        {"run",
         {
             {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); }},
             {"jobs", [](RunConfig& c, const std::string& v) { c.jobs = to_u64(v); }},
         }},
        {"data",
         {
             {"problem", [](RunConfig& c, const std::string& v) { c.problem = problem_from_string(v); }},
             {"scale",
              [](RunConfig& c, const std::string& v) {
                  if (v != "desk" && v != "full") throw std::invalid_argument("expected desk or full");
                  c.scale = v;
              }},
             {"samples", [](RunConfig& c, const std::string& v) { c.samples = to_u64(v); }},
             {"path", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
             {"grid_points", [](RunConfig& c, const std::string& v) { c.grid_points = to_u64(v); }},
             {"final_time", [](RunConfig& c, const std::string& v) { c.final_time = to_double(v); }},
             {"viscosity", [](RunConfig& c, const std::string& v) { c.viscosity = to_double(v); }},
             {"dt", [](RunConfig& c, const std::string& v) { c.dt = to_double(v); }},
             {"frequency", [](RunConfig& c, const std::string& v) { c.frequency = to_double(v); }},
             {"fixed_seed", [](RunConfig& c, const std::string& v) { c.fixed_seed = to_u64(v); }},
         }},
        {"model",
         {
             {"arch", [](RunConfig& c, const std::string& v) { c.model.arch = architecture_from_string(v); }},
             {"width", [](RunConfig& c, const std::string& v) { c.model.width = to_u64(v); }},
             {"d_u", [](RunConfig& c, const std::string& v) { c.model.d_u = to_u64(v); }},
             {"d_v", [](RunConfig& c, const std::string& v) { c.model.d_v = to_u64(v); }},
             {"k_max", [](RunConfig& c, const std::string& v) { c.model.k_max = to_u64(v); }},
             {"two_corner", [](RunConfig& c, const std::string& v) { c.model.two_corner = to_bool(v); }},
             {"centered_pca", [](RunConfig& c, const std::string& v) { c.model.centered_pca = to_bool(v); }},
             {"normalize", [](RunConfig& c, const std::string& v) { c.model.normalize = normalization_from_string(v); }},
         }},
        {"train",
         {
             {"epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = to_u64(v); }},
             {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_u64(v); }},
             {"learning_rate", [](RunConfig& c, const std::string& v) { c.train.adam.learning_rate = to_double(v); }},
             {"lr_decay", [](RunConfig& c, const std::string& v) { c.train.lr_decay = to_double(v); }},
             {"decay_every", [](RunConfig& c, const std::string& v) { c.train.decay_every = to_u64(v); }},
             {"points_per_sample", [](RunConfig& c, const std::string& v) { c.train.points_per_sample = to_u64(v); }},
             {"n_train", [](RunConfig& c, const std::string& v) { c.n_train = to_u64(v); }},
         }},
        {"sweep",
         {
             {"archs",
              [](RunConfig& c, const std::string& v) {
                  c.sweep.archs = list_of<Architecture>(v, architecture_from_string);
              }},
             {"widths", [](RunConfig& c, const std::string& v) { c.sweep.widths = list_of<std::size_t>(v, to_u64); }},
             {"fno_widths",
              [](RunConfig& c, const std::string& v) { c.sweep.fno_widths = list_of<std::size_t>(v, to_u64); }},
             {"n_train", [](RunConfig& c, const std::string& v) { c.sweep.n_train = list_of<std::size_t>(v, to_u64); }},
             {"seeds", [](RunConfig& c, const std::string& v) { c.sweep.seeds = list_of<std::uint64_t>(v, to_u64); }},
             {"ood_factor", [](RunConfig& c, const std::string& v) { c.sweep.cell.ood_factor = to_double(v); }},
             {"ood_samples", [](RunConfig& c, const std::string& v) { c.sweep.cell.ood_samples = to_u64(v); }},
             {"timing", [](RunConfig& c, const std::string& v) { c.sweep.cell.timing = to_bool(v); }},
             {"dump_cases", [](RunConfig& c, const std::string& v) { c.sweep.dump_cases = to_bool(v); }},
         }},
        {"output",
         {
             {"dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
             {"checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; }},
         }},
    };
    return s;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        const std::string where = source + ":" + std::to_string(lineno) + ": ";
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw UsageError(where + "malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (!schema().contains(section)) throw UsageError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(where + "expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw UsageError(where + "key '" + key + "' appears before any section header");
        const auto& keys = schema().at(section);
        const auto it = keys.find(key);
        if (it == keys.end()) throw UsageError(where + "unknown key '" + key + "' in section [" + section + "]");
        if (!seen.insert(section + "." + key).second)
            throw UsageError(where + "duplicate key '" + key + "' in section [" + section + "]");
        if (value.empty()) throw UsageError(where + "key '" + key + "' has no value");
        try {
            it->second(cfg, value);
        } catch (const UsageError& e) {
            throw UsageError(where + e.what());
        } catch (const std::exception& e) {
            throw UsageError(where + "bad value '" + value + "' for " + section + "." + key + " (" + e.what() + ")");
        }
    }
    cfg.sweep.jobs = cfg.jobs;
    if (cfg.jobs == 0) throw UsageError(source + ": run.jobs must be at least 1");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

void apply_environment(RunConfig& cfg) {
    const char* env = std::getenv("OPBENCH_SEED");
    if (!env) return;
    try {
        cfg.seed = to_u64(trim(env));
    } catch (const std::exception&) {
        throw UsageError(std::string("OPBENCH_SEED must be a non-negative integer, got '") + env + "'");
    }
}

ProblemSpec problem_spec(const RunConfig& cfg) {
    ProblemSpec p = cfg.scale == "full" ? full_problem(cfg.problem) : desk_problem(cfg.problem);
    p.fixed_seed = cfg.fixed_seed;
    if (cfg.grid_points) {
        const std::size_t n = *cfg.grid_points;
        const Grid& g = p.input.grid;
        p.input.grid = g.dims() == 1 ? Grid::line(n, g.extent(0), g.boundary(0)) : Grid::square(n, g.extent(0), g.boundary(0));
    }
    if (cfg.final_time) {
        p.ns.final_time = *cfg.final_time;
        p.advection.final_time = *cfg.final_time;
    }
    if (cfg.viscosity) p.ns.viscosity = *cfg.viscosity;
    if (cfg.dt) p.ns.dt = *cfg.dt;
    if (cfg.frequency) p.helmholtz.frequency = *cfg.frequency;
    return p;
}

}  // namespace opbench
