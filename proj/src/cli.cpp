#include "cavity/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unistd.h>

namespace cavity::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Kind { number, integer, grid, text, anchors, flag };

struct Key {
    const char* name;  // config key; the flag is --name with '_' -> '-'
    Kind kind;
    const char* help;
};

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"scenario", Kind::text, "schwarzschild | rindler | both"},
        {"m", Kind::number, "black hole mass"},
        {"R", Kind::grid, "entrance radius: value, list a,b,c, geom:lo:hi:n or lin:lo:hi:n"},
        {"L", Kind::grid, "cavity proper length (same forms as R)"},
        {"a", Kind::number, "Rindler acceleration (default: matched at the anchor)"},
        {"anchor", Kind::anchors, "entrance | middle, or a comma list"},
        {"lambda", Kind::number, "coupling strength"},
        {"omega_mode", Kind::integer, "gap resonant with mode n: Omega = n pi / L"},
        {"omega", Kind::number, "explicit gap Omega"},
        {"tau_end", Kind::number, "switch-off proper time (default: full transit)"},
        {"tau_grid", Kind::grid, "transit fractions in (0, 1] for profiles"},
        {"samples", Kind::integer, "trajectory rows"},
        {"validity_threshold", Kind::number, "estimator value above which rows are flagged"},
        {"n_max", Kind::integer, "modes summed before the first tail check"},
        {"tail_rel_tol", Kind::number, "accepted relative remainder of the mode sum"},
        {"n_max_limit", Kind::integer, "largest mode count tried"},
        {"abs_tol", Kind::number, "quadrature absolute tolerance"},
        {"rel_tol", Kind::number, "quadrature relative tolerance"},
        {"max_subdivisions", Kind::integer, "quadrature panel budget"},
        {"slice_L", Kind::number, "fig2 slice at fixed L"},
        {"slice_R", Kind::number, "fig2 slice at fixed R"},
        {"threads", Kind::integer, "worker threads"},
        {"verify", Kind::flag, "compute P2 by double quadrature and report the unitarity residual"},
        {"output", Kind::text, "CSV path (default: $CAVITY_UDW_OUTPUT_DIR/<name>.csv)"},
    };
    return table;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : keys())
        if (name == k.name) return &k;
    return nullptr;
}

std::string flag_of(const std::string& key) {
    std::string f = "--" + key;
    std::replace(f.begin(), f.end(), '_', '-');
    return f;
}

// Keys that are execution settings rather than figure parameters.
const std::set<std::string> kExecutionKeys = {"threads", "verify", "output"};

const std::set<std::string> kAccuracyKeys = {"n_max",  "tail_rel_tol", "n_max_limit",
                                             "abs_tol", "rel_tol",     "max_subdivisions"};

std::set<std::string> allowed_keys(Command c, std::optional<FigureId> fig) {
    std::set<std::string> s = {"threads", "output"};
    auto add = [&s](std::initializer_list<const char*> names) {
        for (const char* n : names) s.insert(n);
    };
    auto add_response = [&] {
        add({"scenario", "m", "R", "L", "anchor", "lambda", "omega_mode", "omega", "validity_threshold", "verify"});
        s.insert(kAccuracyKeys.begin(), kAccuracyKeys.end());
    };
    switch (c) {
        case Command::estimator: add({"m", "R", "L", "validity_threshold"}); break;
        case Command::trajectory: add({"scenario", "m", "R", "L", "a", "anchor", "tau_end", "samples"}); break;
        case Command::transition:
            add_response();
            add({"a", "tau_end"});
            s.erase("validity_threshold");
            break;
        case Command::profile: add_response(); add({"tau_grid"}); break;
        case Command::sweep: add_response(); break;
        case Command::figure:
            if (fig == FigureId::fig2) {
                add({"m", "R", "L", "validity_threshold", "slice_L", "slice_R"});
            } else {
                add_response();
                if (fig == FigureId::fig3) s.insert("tau_grid");
            }
            break;
    }
    return s;
}

// One supplied setting, from the config file or a flag.
struct Supplied {
    json value;
    bool from_flag = false;
    int line = 0;  // config line, 0 when unknown
};

std::string where(const std::string& key, const Supplied& v) {
    if (v.from_flag) return "flag " + flag_of(key);
    std::string out = "config key '" + key + "'";
    if (v.line > 0) out += " (line " + std::to_string(v.line) + ")";
    return out;
}

[[noreturn]] void bad_value(const std::string& key, const Supplied& v, const std::string& expected) {
    throw ConfigError(where(key, v) + ": expected " + expected + ", got " + v.value.dump());
}

std::optional<double> parse_double(const std::string& text) {
    if (text.empty()) return std::nullopt;
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || *end != '\0') return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(text);
    while (std::getline(in, part, sep)) parts.push_back(part);
    if (!text.empty() && text.back() == sep) parts.emplace_back();
    return parts;
}

double get_number(const std::string& key, const Supplied& v) {
    if (v.value.is_number()) return v.value.get<double>();
    if (v.from_flag && v.value.is_string())
        if (auto d = parse_double(v.value.get<std::string>())) return *d;
    bad_value(key, v, "a number");
}

int get_int(const std::string& key, const Supplied& v) {
    const double d = get_number(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) bad_value(key, v, "an integer");
    return static_cast<int>(d);
}

std::vector<double> get_grid(const std::string& key, const Supplied& v) {
    if (v.value.is_number()) return {v.value.get<double>()};
    if (v.value.is_array()) {
        std::vector<double> out;
        for (const auto& e : v.value) {
            if (!e.is_number()) bad_value(key, v, "an array of numbers");
            out.push_back(e.get<double>());
        }
        if (out.empty()) bad_value(key, v, "a non-empty grid");
        return out;
    }
    if (!v.value.is_string()) bad_value(key, v, "a number, array or grid string");
    const std::string text = v.value.get<std::string>();
    const auto parts = split(text, ':');
    if (parts.size() == 4 && (parts[0] == "geom" || parts[0] == "lin")) {
        const auto lo = parse_double(parts[1]), hi = parse_double(parts[2]), n = parse_double(parts[3]);
        if (!lo || !hi || !n || *n != std::floor(*n) || *n < 1 || *n > 1e6)
            bad_value(key, v, "geom:lo:hi:n or lin:lo:hi:n");
        try {
            return parts[0] == "geom" ? geometric_grid(*lo, *hi, static_cast<int>(*n))
                                      : linear_grid(*lo, *hi, static_cast<int>(*n));
        } catch (const DomainError& e) {
            throw ConfigError(where(key, v) + ": " + e.what());
        }
    }
    std::vector<double> out;
    for (const auto& p : split(text, ',')) {
        const auto d = parse_double(p);
        if (!d) bad_value(key, v, "a number, comma list or grid string");
        out.push_back(*d);
    }
    return out;
}

std::string get_text(const std::string& key, const Supplied& v) {
    if (!v.value.is_string()) bad_value(key, v, "a string");
    return v.value.get<std::string>();
}

std::vector<Anchor> get_anchors(const std::string& key, const Supplied& v) {
    std::vector<std::string> names;
    if (v.value.is_array()) {
        for (const auto& e : v.value) {
            if (!e.is_string()) bad_value(key, v, "an array of anchor names");
            names.push_back(e.get<std::string>());
        }
    } else if (v.value.is_string()) {
        names = split(v.value.get<std::string>(), ',');
    } else {
        bad_value(key, v, "'entrance', 'middle' or a list of them");
    }
    std::vector<Anchor> out;
    for (const auto& n : names) {
        try {
            out.push_back(parse_anchor(n));
        } catch (const DomainError& e) {
            throw ConfigError(where(key, v) + ": " + e.what());
        }
    }
    if (out.empty()) bad_value(key, v, "at least one anchor");
    return out;
}

bool get_flag(const std::string& key, const Supplied& v) {
    if (!v.value.is_boolean()) bad_value(key, v, "true or false");
    return v.value.get<bool>();
}

// Line of the first `"key":` in the config text.
int line_of_key(const std::string& text, const std::string& key) {
    const std::string quoted = "\"" + key + "\"";
    std::size_t pos = 0;
    while ((pos = text.find(quoted, pos)) != std::string::npos) {
        std::size_t after = pos + quoted.size();
        while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
        if (after < text.size() && text[after] == ':')
            return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
        pos = after;
    }
    return 0;
}

std::map<std::string, Supplied> read_config(const fs::path& path, std::string& command, std::string& figure) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config '" + path.string() + "': top level must be an object");
    std::map<std::string, Supplied> out;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const int line = line_of_key(text, it.key());
        if (it.key() == "command" || it.key() == "figure") {
            if (!it.value().is_string())
                throw ConfigError("config key '" + it.key() + "' (line " + std::to_string(line) + "): expected a string");
            (it.key() == "command" ? command : figure) = it.value().get<std::string>();
            continue;
        }
        if (!find_key(it.key()))
            throw ConfigError("config key '" + it.key() + "' (line " + std::to_string(line) + "): unknown key");
        out[it.key()] = Supplied{it.value(), false, line};
    }
    return out;
}

Command parse_command(const std::string& text) {
    static const std::map<std::string, Command> names = {
        {"trajectory", Command::trajectory}, {"estimator", Command::estimator}, {"transition", Command::transition},
        {"profile", Command::profile},       {"sweep", Command::sweep},         {"figure", Command::figure}};
    const auto it = names.find(text);
    if (it == names.end())
        throw ConfigError("unknown command '" + text +
                          "' (expected trajectory, estimator, transition, profile, sweep or figure)");
    return it->second;
}

FigureId parse_figure(const std::string& text) {
    static const std::map<std::string, FigureId> names = {{"fig2", FigureId::fig2},
                                                          {"fig3", FigureId::fig3},
                                                          {"fig4", FigureId::fig4},
                                                          {"fig5a", FigureId::fig5a},
                                                          {"fig5b", FigureId::fig5b}};
    const auto it = names.find(text);
    if (it == names.end())
        throw ConfigError("unknown figure '" + text + "' (expected fig2, fig3, fig4, fig5a or fig5b)");
    return it->second;
}

std::vector<double> transit_fractions(int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = (i + 1.0) / n;
    return g;
}

// Defaults for each command before any supplied key is applied.
void apply_defaults(RunConfig& cfg) {
    SweepSpec& s = cfg.sweep;
    const std::vector<double> radius_grid = geometric_grid(5.0, 100.0, 32);
    switch (cfg.command) {
        case Command::estimator:
            s.R = {10.0};
            s.L = {2.0};
            break;
        case Command::trajectory:
        case Command::transition:
            s.scenario = Scenario::schwarzschild;
            break;
        case Command::profile: s.tau_grid = transit_fractions(50); break;
        case Command::sweep:
            s.R = radius_grid;
            s.L = {4.0};
            break;
        case Command::figure:
            switch (*cfg.figure) {
                case FigureId::fig2:
                    s.R = geometric_grid(3.0, 100.0, 50);
                    s.L = linear_grid(0.1, 6.0, 60);
                    break;
                case FigureId::fig3: s.tau_grid = transit_fractions(50); break;
                case FigureId::fig4:
                    s.R = radius_grid;
                    s.L = {4.0};
                    break;
                case FigureId::fig5a:
                case FigureId::fig5b:
                    s.R = radius_grid;
                    s.L = {1e-3, 0.3, 2.0, 4.0, 6.0};
                    s.anchors = {*cfg.figure == FigureId::fig5a ? Anchor::middle : Anchor::entrance};
                    break;
            }
            break;
    }
}

void apply_key(RunConfig& cfg, const std::string& key, const Supplied& v) {
    SweepSpec& s = cfg.sweep;
    if (key == "scenario") {
        try {
            s.scenario = parse_scenario(get_text(key, v));
        } catch (const DomainError& e) {
            throw ConfigError(where(key, v) + ": " + e.what());
        }
    } else if (key == "m") s.m = get_number(key, v);
    else if (key == "R") s.R = get_grid(key, v);
    else if (key == "L") s.L = get_grid(key, v);
    else if (key == "a") cfg.a = get_number(key, v);
    else if (key == "anchor") s.anchors = get_anchors(key, v);
    else if (key == "lambda") s.lambda = get_number(key, v);
    else if (key == "omega_mode") s.omega_rule.resonant_mode = get_int(key, v);
    else if (key == "omega") s.omega_rule.explicit_omega = get_number(key, v);
    else if (key == "tau_end") cfg.tau_end = get_number(key, v);
    else if (key == "tau_grid") s.tau_grid = get_grid(key, v);
    else if (key == "samples") cfg.samples = get_int(key, v);
    else if (key == "validity_threshold") s.validity_threshold = get_number(key, v);
    else if (key == "n_max") s.n_max = get_int(key, v);
    else if (key == "tail_rel_tol") s.tail_rel_tol = get_number(key, v);
    else if (key == "n_max_limit") s.n_max_limit = get_int(key, v);
    else if (key == "abs_tol") s.quad.abs_tol = get_number(key, v);
    else if (key == "rel_tol") s.quad.rel_tol = get_number(key, v);
    else if (key == "max_subdivisions") {
        const int n = get_int(key, v);
        if (n < 1) bad_value(key, v, "a positive integer");
        s.quad.max_subdivisions = static_cast<std::size_t>(n);
    } else if (key == "slice_L") cfg.slice_L = get_number(key, v);
    else if (key == "slice_R") cfg.slice_R = get_number(key, v);
    else if (key == "threads") s.threads = get_int(key, v);
    else if (key == "verify") s.verify_unitarity = get_flag(key, v);
    else if (key == "output") cfg.output = get_text(key, v);
}

bool single_worldline(Command c) { return c == Command::trajectory || c == Command::transition; }

}  // namespace

std::string_view to_string(Command c) {
    switch (c) {
        case Command::trajectory: return "trajectory";
        case Command::estimator: return "estimator";
        case Command::transition: return "transition";
        case Command::profile: return "profile";
        case Command::sweep: return "sweep";
        case Command::figure: return "figure";
    }
    return "figure";
}

std::string_view to_string(FigureId f) {
    switch (f) {
        case FigureId::fig2: return "fig2";
        case FigureId::fig3: return "fig3";
        case FigureId::fig4: return "fig4";
        case FigureId::fig5a: return "fig5a";
        case FigureId::fig5b: return "fig5b";
    }
    return "fig2";
}

void RunConfig::validate() const {
    const SweepSpec& s = sweep;
    if (!(s.m > 0.0) || !std::isfinite(s.m)) throw DomainError("m must be > 0");
    if (s.threads < 1) throw DomainError("threads must be >= 1");
    auto is_fig2 = command == Command::figure && figure == FigureId::fig2;
    if (command == Command::estimator || is_fig2) {
        if (s.R.empty() || s.L.empty()) throw DomainError("R and L grids must be non-empty");
        for (double r : s.R)
            if (!(r > 2.0 * s.m)) throw DomainError("R must exceed 2m");
        for (double l : s.L)
            if (!(l > 0.0)) throw DomainError("L must be > 0");
        if (command == Command::estimator && s.R.size() == 1 && s.L.size() == 1)
            SchwarzschildBackground(s.m, s.R[0]).require_cavity_fits(s.L[0]);
        if (is_fig2) {
            if (!(slice_R > 2.0 * s.m)) throw DomainError("slice_R must exceed 2m");
            if (!(slice_L > 0.0)) throw DomainError("slice_L must be > 0");
        }
        return;
    }
    if (single_worldline(command)) {
        if (s.scenario == Scenario::both)
            throw DomainError(std::string(to_string(command)) + " takes scenario schwarzschild or rindler");
        if (s.R.size() != 1 || s.L.size() != 1 || s.anchors.size() != 1)
            throw DomainError(std::string(to_string(command)) + " takes a single R, L and anchor");
        if (!(s.L[0] > 0.0)) throw DomainError("L must be > 0");
        if (s.scenario == Scenario::schwarzschild) {
            if (a) throw DomainError("a applies only to the rindler scenario");
            SchwarzschildBackground(s.m, s.R[0]).require_cavity_fits(s.L[0]);
        } else if (a) {
            RindlerWorldline check(*a);
        } else {
            SchwarzschildBackground(s.m, s.R[0]).require_cavity_fits(s.L[0]);
        }
        if (tau_end && !(*tau_end > 0.0)) throw DomainError("tau_end must be > 0");
        if (command == Command::trajectory) {
            if (samples < 2) throw DomainError("samples must be >= 2");
        } else {
            s.omega_rule.validate();
            DetectorSpec{s.lambda, s.omega_rule.omega(s.L[0])}.validate();
            CavitySpec{s.L[0], s.n_max, s.tail_rel_tol, s.n_max_limit}.validate();
            s.quad.validate();
        }
        return;
    }
    s.validate();
    const bool profile = command == Command::profile || (command == Command::figure && figure == FigureId::fig3);
    if (profile) {
        if (s.R.size() != 1 || s.L.size() != 1) throw DomainError("profile takes a single R and L");
        if (s.tau_grid.empty()) throw DomainError("profile needs a tau_grid");
        SchwarzschildBackground(s.m, s.R[0]).require_cavity_fits(s.L[0]);
    } else if (!s.tau_grid.empty()) {
        throw DomainError("tau_grid applies only to profiles");
    }
}

RunConfig parse_config(const std::vector<std::string>& args, const fs::path& default_output_dir) {
    CLI::App app{"Unruh-DeWitt detector in a cavity: Schwarzschild free fall vs Rindler", "cavity-udw"};
    std::string command_text, figure_text, config_path;
    bool override_flag = false;
    app.add_option("command", command_text, "trajectory | estimator | transition | profile | sweep | figure");
    app.add_option("figure", figure_text, "fig2 | fig3 | fig4 | fig5a | fig5b (figure command only)");
    app.add_option("-c,--config", config_path, "JSON config file; flags take precedence");
    app.add_flag("--override", override_flag, "allow changing a figure's pinned parameters");
    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> flag_options;
    bool verify_flag = false;
    for (const auto& k : keys()) {
        const std::string name = k.name;
        if (k.kind == Kind::flag) {
            flag_options[name] = app.add_flag(flag_of(name), verify_flag, k.help);
        } else {
            const std::string names = name == "output" ? "-o," + flag_of(name) : flag_of(name);
            flag_options[name] = app.add_option(names, flag_values[name], k.help);
        }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    std::map<std::string, Supplied> supplied;
    std::string config_command, config_figure;
    if (!config_path.empty()) supplied = read_config(config_path, config_command, config_figure);
    for (const auto& [name, opt] : flag_options) {
        if (opt->count() == 0) continue;
        json value = find_key(name)->kind == Kind::flag ? json(verify_flag) : json(flag_values[name]);
        supplied[name] = Supplied{value, true, 0};
    }
    if (command_text.empty()) command_text = config_command;
    if (figure_text.empty()) figure_text = config_figure;
    if (command_text.empty()) throw ConfigError("no command given (try --help)");

    RunConfig cfg;
    cfg.command = parse_command(command_text);
    if (cfg.command == Command::figure) {
        if (figure_text.empty()) throw ConfigError("figure command needs a figure id (fig2, fig3, fig4, fig5a, fig5b)");
        cfg.figure = parse_figure(figure_text);
    } else if (!figure_text.empty()) {
        throw ConfigError("unexpected argument '" + figure_text + "' for command " + command_text);
    }
    apply_defaults(cfg);

    const auto allowed = allowed_keys(cfg.command, cfg.figure);
    for (const auto& [key, value] : supplied) {
        if (!allowed.count(key))
            throw ConfigError(where(key, value) + ": does not apply to " + command_text +
                              (cfg.figure ? " " + figure_text : std::string()));
        if (cfg.command == Command::figure && !kExecutionKeys.count(key)) {
            if (!override_flag)
                throw ConfigError(where(key, value) + ": figure " + figure_text +
                                  " pins its parameters; pass --override to change them");
            cfg.overridden.push_back(key);
        }
        apply_key(cfg, key, value);
    }
    if (supplied.count("omega") && supplied.count("omega_mode"))
        throw ConfigError("give either omega or omega_mode, not both");
    if (override_flag && cfg.command != Command::figure) throw ConfigError("--override applies only to figures");

    if (cfg.output.empty()) {
        const std::string name = cfg.figure ? std::string(to_string(*cfg.figure)) : std::string(to_string(cfg.command));
        cfg.output = default_output_dir / (name + ".csv");
    }
    cfg.validate();
    return cfg;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// A file written next to its destination and renamed into place on commit.
// Uncommitted files are removed on destruction.
class PendingFile {
  public:
    explicit PendingFile(fs::path target) : target_(std::move(target)) {
        tmp_ = target_;
        tmp_ += ".tmp-" + std::to_string(::getpid());
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw DomainError("output path not writable: " + target_.string());
    }
    PendingFile(const PendingFile&) = delete;
    PendingFile& operator=(const PendingFile&) = delete;
    ~PendingFile() {
        if (out_.is_open()) out_.close();
        std::error_code ec;
        if (!committed_) fs::remove(tmp_, ec);
    }

    std::ostream& stream() { return out_; }
    const fs::path& target() const { return target_; }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("failed writing " + tmp_.string());
    }
    void commit() {
        fs::rename(tmp_, target_);
        committed_ = true;
    }

  private:
    fs::path target_;
    fs::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

fs::path sibling(const fs::path& csv, const std::string& suffix) {
    fs::path p = csv.parent_path() / csv.stem();
    p += suffix;
    return p;
}

const char* kSweepHeader =
    "R,L,m,a,anchor,tau_fraction,tau_end_schwarzschild,tau_end_rindler,P1_schwarzschild,P1_rindler,ratio,"
    "estimator,tail_schwarzschild,tail_rindler,unitarity_residual,flags\n";

void write_sweep(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << kSweepHeader;
    for (const auto& r : rows) {
        out << num(r.R) << ',' << num(r.L) << ',' << num(r.m) << ',' << num(r.a) << ',' << to_string(r.anchor) << ','
            << num(r.tau_fraction) << ',' << num(r.tau_end_schwarzschild) << ',' << num(r.tau_end_rindler) << ','
            << opt_num(r.P1_schwarzschild) << ',' << opt_num(r.P1_rindler) << ',' << num(r.ratio) << ','
            << num(r.estimator) << ',' << num(r.tail_schwarzschild) << ',' << num(r.tail_rindler) << ','
            << num(r.unitarity_residual) << ',' << r.flags.str() << '\n';
    }
}

void write_estimator(std::ostream& out, const std::vector<EstimatorRow>& rows) {
    out << "R,L,m,estimator,valid,above_threshold\n";
    for (const auto& r : rows)
        out << num(r.R) << ',' << num(r.L) << ',' << num(r.m) << ',' << num(r.estimator) << ','
            << (r.valid ? "true" : "false") << ',' << (r.above_threshold ? "true" : "false") << '\n';
}

json sweep_inputs(const RunConfig& cfg) {
    const SweepSpec& s = cfg.sweep;
    json in;
    in["scenario"] = std::string(to_string(s.scenario));
    in["m"] = s.m;
    in["R"] = s.R;
    in["L"] = s.L;
    json anchors = json::array();
    for (Anchor a : s.anchors) anchors.push_back(std::string(to_string(a)));
    in["anchor"] = anchors;
    in["lambda"] = s.lambda;
    if (s.omega_rule.explicit_omega) in["omega"] = *s.omega_rule.explicit_omega;
    else in["omega_mode"] = s.omega_rule.resonant_mode;
    if (!s.tau_grid.empty()) in["tau_grid"] = s.tau_grid;
    if (cfg.a) in["a"] = *cfg.a;
    if (cfg.tau_end) in["tau_end"] = *cfg.tau_end;
    if (cfg.command == Command::trajectory) in["samples"] = cfg.samples;
    in["validity_threshold"] = s.validity_threshold;
    if (cfg.figure == FigureId::fig2) {
        in["slice_L"] = cfg.slice_L;
        in["slice_R"] = cfg.slice_R;
    }
    in["threads"] = s.threads;
    in["verify"] = s.verify_unitarity;
    return in;
}

json tolerances(const SweepSpec& s) {
    return json{{"abs_tol", s.quad.abs_tol},
                {"rel_tol", s.quad.rel_tol},
                {"max_subdivisions", s.quad.max_subdivisions},
                {"max_phase_per_panel", s.quad.max_phase_per_panel},
                {"n_max", s.n_max},
                {"tail_rel_tol", s.tail_rel_tol},
                {"n_max_limit", s.n_max_limit}};
}

Worldline single_worldline_of(const RunConfig& cfg, double& a_out) {
    const SweepSpec& s = cfg.sweep;
    a_out = std::numeric_limits<double>::quiet_NaN();
    if (s.scenario == Scenario::schwarzschild) return FreeFallWorldline(SchwarzschildBackground(s.m, s.R[0]));
    a_out = cfg.a ? *cfg.a : matched_acceleration(SchwarzschildBackground(s.m, s.R[0]), s.L[0], s.anchors[0]);
    return RindlerWorldline(a_out);
}

}  // namespace

ExecuteReport execute(const RunConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const SweepSpec& s = cfg.sweep;
    const bool fig2 = cfg.figure == FigureId::fig2;

    std::vector<std::unique_ptr<PendingFile>> files;
    files.push_back(std::make_unique<PendingFile>(cfg.output));
    if (fig2) {
        files.push_back(std::make_unique<PendingFile>(sibling(cfg.output, "_slice_L.csv")));
        files.push_back(std::make_unique<PendingFile>(sibling(cfg.output, "_slice_R.csv")));
    }
    files.push_back(std::make_unique<PendingFile>(sibling(cfg.output, ".manifest.json")));
    std::ostream& csv = files.front()->stream();

    ExecuteReport report;
    double max_residual = std::numeric_limits<double>::quiet_NaN();
    auto note_residual = [&max_residual](double r) {
        if (!std::isnan(r) && !(r <= max_residual)) max_residual = r;
    };
    json extra = json::object();

    switch (cfg.command) {
        case Command::estimator:
        case Command::figure:
            if (cfg.command == Command::estimator || fig2) {
                const auto surface = run_estimator_surface(s.R, s.L, s.m, cfg.slice_L, cfg.slice_R, s.validity_threshold);
                write_estimator(csv, surface.surface);
                if (fig2) {
                    write_estimator(files[1]->stream(), surface.slice_fixed_L);
                    write_estimator(files[2]->stream(), surface.slice_fixed_R);
                }
                report.rows = surface.surface.size();
                for (const auto& r : surface.surface) report.flagged_rows += !r.valid || r.above_threshold;
                break;
            }
            [[fallthrough]];
        case Command::profile:
        case Command::sweep: {
            std::vector<SweepRow> rows;
            const bool profile = cfg.command == Command::profile || cfg.figure == FigureId::fig3;
            if (profile) rows = run_transit_profile(s);
            else if (cfg.figure == FigureId::fig4) rows = run_radius_sweep(s);
            else rows = run_ratio_curves(s);
            write_sweep(csv, rows);
            report.rows = rows.size();
            for (const auto& r : rows) {
                report.flagged_rows += r.flags.any();
                note_residual(r.unitarity_residual);
            }
            break;
        }
        case Command::transition: {
            double a = 0.0;
            const Worldline wl = single_worldline_of(cfg, a);
            const double L = s.L[0];
            const double transit = transit_time(wl, L);
            const double tau_end = cfg.tau_end ? *cfg.tau_end : transit;
            if (tau_end > transit) throw DomainError("tau_end exceeds the cavity transit time");
            ResponseOptions options;
            options.verify_unitarity = s.verify_unitarity;
            const TransitionResult r =
                transition_probability(wl, CavitySpec{L, s.n_max, s.tail_rel_tol, s.n_max_limit},
                                       DetectorSpec{s.lambda, s.omega_rule.omega(L)}, s.quad, tau_end, options);
            const bool explicit_a = s.scenario == Scenario::rindler && cfg.a;
            csv << "scenario,R,L,m,a,anchor,lambda,omega,tau_end,transit_time,P1,P2,truncation_tail,n_modes,"
                   "unitarity_residual\n";
            csv << to_string(s.scenario) << ',' << (explicit_a ? "" : num(s.R[0])) << ',' << num(L) << ','
                << num(s.m) << ',' << num(a) << ','
                << (s.scenario == Scenario::rindler && !explicit_a ? to_string(s.anchors[0]) : "") << ','
                << num(s.lambda) << ',' << num(s.omega_rule.omega(L)) << ',' << num(r.T) << ',' << num(transit)
                << ',' << num(r.P1) << ',' << num(r.P2) << ',' << num(r.truncation_tail) << ',' << r.modes.size()
                << ',' << num(r.unitarity_residual) << '\n';
            report.rows = 1;
            note_residual(r.unitarity_residual);
            extra["p2_from_double_quadrature"] = r.p2_from_double_quadrature;
            break;
        }
        case Command::trajectory: {
            double a = 0.0;
            const Worldline wl = single_worldline_of(cfg, a);
            const double transit = transit_time(wl, s.L[0]);
            const double tau_end = cfg.tau_end ? *cfg.tau_end : transit;
            if (tau_end > transit) throw DomainError("tau_end exceeds the cavity transit time");
            csv << "tau,space,time,lag\n";
            for (int i = 0; i < cfg.samples; ++i) {
                const double tau = i + 1 == cfg.samples ? tau_end : tau_end * i / (cfg.samples - 1);
                const WorldlinePoint p = position(wl, tau);
                csv << num(p.tau) << ',' << num(p.space) << ',' << num(p.time) << ',' << num(p.lag) << '\n';
            }
            report.rows = static_cast<std::size_t>(cfg.samples);
            if (!std::isnan(a)) extra["a"] = a;
            extra["transit_time"] = transit;
            break;
        }
    }

    json manifest;
    manifest["command"] = std::string(to_string(cfg.command));
    manifest["figure"] = cfg.figure ? json(std::string(to_string(*cfg.figure))) : json(nullptr);
    manifest["inputs"] = sweep_inputs(cfg);
    manifest["overridden"] = cfg.overridden;
    manifest["tolerances"] = tolerances(s);
    manifest["normalization"] = "1/sqrt(omega_n L)";
    manifest["estimator_sign"] = "plus (tortoise difference)";
    manifest["unitarity_residual_max"] = std::isnan(max_residual) ? json(nullptr) : json(max_residual);
    manifest["unitarity_check"] = std::isnan(max_residual) ? "not verified" : "verified";
    manifest["rows"] = report.rows;
    manifest["flagged_rows"] = report.flagged_rows;
    json outputs = json::array();
    for (const auto& f : files) outputs.push_back(f->target().string());
    manifest["outputs"] = outputs;
    if (!extra.empty()) manifest["derived"] = extra;
    manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    files.back()->stream() << manifest.dump(2) << '\n';

    for (auto& f : files) f->close();
    try {
        for (auto& f : files) {
            f->commit();
            report.written.push_back(f->target());
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : report.written) fs::remove(p, ec);
        throw;
    }
    return report;
}

int run(const std::vector<std::string>& args) {
    const char* env_dir = std::getenv("CAVITY_UDW_OUTPUT_DIR");
    const fs::path default_dir = env_dir && *env_dir ? fs::path(env_dir) : fs::path(".");
    try {
        const RunConfig cfg = parse_config(args, default_dir);
        const ExecuteReport report = execute(cfg);
        std::cerr << "wrote " << report.written.front().string() << " (" << report.rows << " rows, "
                  << report.flagged_rows << " flagged)\n";
        return kOk;
    } catch (const HelpRequested& h) {
        std::cout << h.what();
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
    } catch (const TruncationError& e) {
        std::cerr << "accuracy failure: " << e.what() << '\n';
        return kAccuracy;
    } catch (const AccuracyError& e) {
        std::cerr << "accuracy failure: " << e.what() << '\n';
        return kAccuracy;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace cavity::cli
