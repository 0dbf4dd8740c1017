#include "gsfde/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gsfde {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw Error(ErrorCode::ConfigError, (path.empty() ? std::string("<root>") : path) + ": " + msg);
}

// Walks one JSON object, remembering the dotted path for diagnostics and
// rejecting keys nobody asked for.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            fail(path_, "expected an object");
        }
    }
    ~Node() noexcept(false) {
        if (std::uncaught_exceptions() == 0) {
            for (const auto& [key, _] : j_.items()) {
                if (!seen_.count(key)) {
                    fail(child_path(key), "unknown field");
                }
            }
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }
    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }
    Node child(const std::string& key) { return Node(raw(key), child_path(key)); }

    void number(const std::string& key, double& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_number()) {
                fail(child_path(key), "expected a number");
            }
            out = v.get<double>();
        }
    }
    void count(const std::string& key, std::size_t& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                fail(child_path(key), "expected a nonnegative integer");
            }
            out = v.get<std::size_t>();
        }
    }
    void seed(const std::string& key, std::uint64_t& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
                fail(child_path(key), "expected an unsigned integer");
            }
            out = v.get<std::uint64_t>();
        }
    }
    void flag(const std::string& key, bool& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_boolean()) {
                fail(child_path(key), "expected true or false");
            }
            out = v.get<bool>();
        }
    }
    void text(const std::string& key, std::string& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_string()) {
                fail(child_path(key), "expected a string");
            }
            out = v.get<std::string>();
        }
    }
    void numbers(const std::string& key, std::vector<double>& out) {
        if (has(key)) {
            const json& v = j_.at(key);
            if (!v.is_array()) {
                fail(child_path(key), "expected an array of numbers");
            }
            out.clear();
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!v[i].is_number()) {
                    fail(child_path(key) + "[" + std::to_string(i) + "]", "expected a number");
                }
                out.push_back(v[i].get<double>());
            }
        }
    }
    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Wraps library errors raised while building an object from a config node.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) {
            throw;
        }
        fail(path, e.what());
    }
}

DelayMeasure parse_measure(Node n, const std::string& name) {
    std::vector<Atom> atoms;
    std::vector<ExpDensity> densities;
    if (n.has("atoms")) {
        const json& arr = n.raw("atoms");
        if (!arr.is_array()) {
            fail(n.child_path("atoms"), "expected an array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Node a(arr[i], n.child_path("atoms") + "[" + std::to_string(i) + "]");
            Atom atom;
            a.number("delay", atom.delay);
            a.number("weight", atom.weight);
            atoms.push_back(atom);
        }
    }
    if (n.has("densities")) {
        const json& arr = n.raw("densities");
        if (!arr.is_array()) {
            fail(n.child_path("densities"), "expected an array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Node d(arr[i], n.child_path("densities") + "[" + std::to_string(i) + "]");
            ExpDensity dens;
            d.number("rate", dens.rate);
            d.number("weight", dens.weight);
            densities.push_back(dens);
        }
    }
    return at_path(n.path(), [&] { return DelayMeasure(atoms, densities, name); });
}

TailModel parse_tail(Node n, std::size_t dim) {
    std::string kind = "constant";
    n.text("kind", kind);
    Vector value(dim, 0.0);
    n.numbers("value", value);
    double rate = 0.0;
    n.number("rate", rate);
    return at_path(n.path(), [&] {
        if (kind == "zero") return TailModel::zero(dim);
        if (kind == "constant") return TailModel::constant(value);
        if (kind == "exponential") return TailModel::exponential(value, rate);
        fail(n.child_path("kind"), "expected zero, constant or exponential");
    });
}

InitialData parse_initial(Node n, std::size_t dim) {
    std::string kind = "constant";
    n.text("kind", kind);
    Vector value(dim, 0.0);
    n.numbers("value", value);
    if (kind != "samples" && value.size() != dim) {
        fail(n.child_path("value"), "expected " + std::to_string(dim) + " components");
    }
    if (kind == "constant") {
        return InitialData::constant(value);
    }
    if (kind == "exp_decay") {
        double rate = 0.0;
        n.number("rate", rate);
        return at_path(n.path(), [&] { return InitialData::exponential_decay(value, rate); });
    }
    if (kind == "samples") {
        std::vector<double> samples;
        n.numbers("samples", samples);
        TailModel tail = TailModel::zero(dim);
        if (n.has("tail")) {
            tail = parse_tail(n.child("tail"), dim);
        }
        return at_path(n.path(), [&] { return InitialData::from_samples(samples, tail); });
    }
    fail(n.child_path("kind"), "expected constant, exp_decay or samples");
}

void parse_functional(Node n, const Config& cfg, double& a, double& b, Vector& offset, DelayMeasure& mu) {
    n.number("a", a);
    n.number("b", b);
    n.numbers("offset", offset);
    if (!offset.empty() && offset.size() != cfg.dim) {
        fail(n.child_path("offset"), "expected " + std::to_string(cfg.dim) + " components");
    }
    if (n.has("measure")) {
        std::string name;
        n.text("measure", name);
        const auto it = cfg.measures.find(name);
        if (it == cfg.measures.end()) {
            fail(n.child_path("measure"), "no measure named '" + name + "'");
        }
        mu = it->second;
    }
}

Control parse_control(Node n, const VolatilityBand& band, std::string& name) {
    std::string kind = "constant";
    n.text("kind", kind);
    n.text("name", name);
    return at_path(n.path(), [&] {
        if (kind == "constant") {
            double s = band.sigma_hi;
            n.number("sigma", s);
            if (name.empty()) name = "const";
            return Control::constant(s);
        }
        if (kind == "switching") {
            double a = band.sigma_lo, b = band.sigma_hi, period = 1.0;
            n.number("sigma_a", a);
            n.number("sigma_b", b);
            n.number("period", period);
            if (name.empty()) name = "switching";
            return Control::switching(a, b, period);
        }
        if (kind == "feedback") {
            double threshold = 1.0, below = band.sigma_lo, above = band.sigma_hi;
            n.number("threshold", threshold);
            n.number("below", below);
            n.number("above", above);
            if (name.empty()) name = "feedback";
            return Control::feedback(threshold, below, above);
        }
        if (kind == "random") {
            if (name.empty()) name = "random";
            return Control::random();
        }
        fail(n.child_path("kind"), "expected constant, switching, feedback or random");
    });
}

std::string position_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void finish(Config& cfg, bool explicit_scenarios) {
    if (!explicit_scenarios) {
        cfg.scenarios = constant_grid(cfg.band, 5);
    }
    if (cfg.scenarios.empty()) {
        fail("scenarios", "the scenario set is empty");
    }
    for (const Scenario& s : cfg.scenarios) {
        const Control& c = s.control();
        const bool inside = c.kind == Control::Kind::Random ||
                            (cfg.band.contains(c.sigma_a) && (c.kind == Control::Kind::Constant || cfg.band.contains(c.sigma_b)));
        if (!inside) {
            fail("scenarios", "control '" + s.name() + "' leaves the volatility band");
        }
    }
    for (double t : cfg.experiments.checkpoints) {
        const double r = t / cfg.dt;
        if (!(t > 0.0) || t > cfg.horizon + 1e-12 || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
            fail("experiments.checkpoints", "checkpoint " + std::to_string(t) + " is not a grid time in (0, horizon]");
        }
    }
    for (const auto& [name, _] : cfg.experiments.enabled) {
        const auto& all = experiment_names();
        if (std::find(all.begin(), all.end(), name) == all.end()) {
            fail("experiments.enabled." + name, "unknown experiment");
        }
    }
    cfg.params.dim = cfg.dim;
}

} // namespace

bool ExperimentSettings::is_enabled(const std::string& name) const {
    const auto it = enabled.find(name);
    return it == enabled.end() ? true : it->second;
}

Config default_config() {
    Config cfg;
    cfg.measures.emplace("mu", DelayMeasure::point_mass(0.25, "mu"));
    const DelayMeasure& mu = cfg.measures.at("mu");
    cfg.params.a_g = 2.0;
    cfg.params.b_g = 0.5;
    cfg.params.a_h = 0.5;
    cfg.params.b_h = 0.1;
    cfg.params.b_gamma = 0.3;
    cfg.params.mu_g = cfg.params.mu_h = cfg.params.mu_gamma = mu;
    cfg.aux = AuxConstants::from_band(cfg.band.sigma_hi, cfg.horizon);
    cfg.experiments.enabled["l2_estimate"] = false;
    finish(cfg, false);
    return cfg;
}

Config parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, source + ": syntax error at " + position_of(text, e.byte) + ": " +
                                                std::string(e.what()));
    }
    Config cfg;
    cfg.source = source;
    cfg.measures.clear();
    cfg.experiments.enabled["l2_estimate"] = false;
    bool explicit_scenarios = false;
    bool k_given[3] = {false, false, false};
    try {
        Node top(root, "");
        if (top.has("space")) {
            Node s = top.child("space");
            s.count("dim", cfg.dim);
            s.number("q", cfg.q);
            s.number("dt", cfg.dt);
            s.number("horizon", cfg.horizon);
            if (cfg.dim == 0) fail("space.dim", "must be positive");
            if (!(cfg.q > 0.0)) fail("space.q", "must be positive");
            if (!(cfg.dt > 0.0) || cfg.dt > 1e-3 * (1 + 1e-12)) fail("space.dt", "must lie in (0, 1e-3]");
            if (!(cfg.horizon > 0.0)) fail("space.horizon", "must be positive");
        }
        cfg.zeta = InitialData::constant(Vector(cfg.dim, 1.0));
        cfg.xi = InitialData::constant(Vector(cfg.dim, 0.0));
        if (top.has("measures")) {
            const json& ms = top.raw("measures");
            if (!ms.is_object()) fail("measures", "expected an object");
            for (const auto& [name, body] : ms.items()) {
                cfg.measures.emplace(name, parse_measure(Node(body, "measures." + name), name));
            }
        }
        if (cfg.measures.empty()) {
            cfg.measures.emplace("mu", DelayMeasure::point_mass(0.25, "mu"));
        }
        {
            const DelayMeasure& first = cfg.measures.begin()->second;
            cfg.params.mu_g = cfg.params.mu_h = cfg.params.mu_gamma = first;
        }
        if (top.has("coefficients")) {
            Node c = top.child("coefficients");
            LinearParams& p = cfg.params;
            if (c.has("g")) parse_functional(c.child("g"), cfg, p.a_g, p.b_g, p.c_g, p.mu_g);
            if (c.has("h")) parse_functional(c.child("h"), cfg, p.a_h, p.b_h, p.c_h, p.mu_h);
            if (c.has("gamma")) parse_functional(c.child("gamma"), cfg, p.a_gamma, p.b_gamma, p.c_gamma, p.mu_gamma);
        }
        if (top.has("initial_data")) {
            Node i = top.child("initial_data");
            if (i.has("zeta")) cfg.zeta = parse_initial(i.child("zeta"), cfg.dim);
            if (i.has("xi")) cfg.xi = parse_initial(i.child("xi"), cfg.dim);
        }
        if (top.has("scenarios")) {
            Node s = top.child("scenarios");
            std::vector<double> band{cfg.band.sigma_lo, cfg.band.sigma_hi};
            s.numbers("band", band);
            if (band.size() != 2) fail("scenarios.band", "expected [sigma_lo, sigma_hi]");
            cfg.band = at_path("scenarios.band", [&] { return VolatilityBand(band[0], band[1]); });
            std::size_t levels = 5;
            s.count("constant_levels", levels);
            cfg.scenarios = levels > 0 ? constant_grid(cfg.band, levels) : ScenarioSet{};
            if (s.has("controls")) {
                const json& arr = s.raw("controls");
                if (!arr.is_array()) fail("scenarios.controls", "expected an array");
                for (std::size_t k = 0; k < arr.size(); ++k) {
                    std::string name;
                    const Control c =
                        parse_control(Node(arr[k], "scenarios.controls[" + std::to_string(k) + "]"), cfg.band, name);
                    cfg.scenarios.emplace_back(name, cfg.band, c);
                }
            }
            explicit_scenarios = true;
        }
        cfg.aux = AuxConstants::from_band(cfg.band.sigma_hi, cfg.horizon);
        if (top.has("aux_constants")) {
            Node a = top.child("aux_constants");
            k_given[0] = a.has("k1");
            k_given[1] = a.has("k2");
            k_given[2] = a.has("k3");
            a.number("k1", cfg.aux.k1);
            a.number("k2", cfg.aux.k2);
            if (k_given[1] && !k_given[2]) cfg.aux.k3 = cfg.aux.k2 * cfg.aux.k2;
            a.number("k3", cfg.aux.k3);
            a.number("T", cfg.aux.T);
            a.number("eps", cfg.aux.eps);
            a.number("eps1", cfg.aux.eps1);
            a.number("eps2", cfg.aux.eps2);
            a.number("p", cfg.aux.p);
            if (a.has("lambda")) {
                double l = 0.0;
                a.number("lambda", l);
                cfg.aux.lambda = l;
            }
            a.flag("scan", cfg.aux.scan);
            at_path("aux_constants", [&] { cfg.aux.validate(); return 0; });
        }
        if (top.has("experiments")) {
            Node e = top.child("experiments");
            ExperimentSettings& x = cfg.experiments;
            e.seed("seed", x.seed);
            e.count("paths", x.paths);
            e.numbers("checkpoints", x.checkpoints);
            e.count("dump_trajectories", x.dump_trajectories);
            if (e.has("enabled")) {
                const json& en = e.raw("enabled");
                if (!en.is_object()) fail("experiments.enabled", "expected an object of booleans");
                for (const auto& [name, v] : en.items()) {
                    if (!v.is_boolean()) fail("experiments.enabled." + name, "expected true or false");
                    x.enabled[name] = v.get<bool>();
                }
            }
            if (e.has("lyapunov")) {
                Node l = e.child("lyapunov");
                l.number("horizon", x.lyapunov_horizon);
                l.count("paths", x.lyapunov_paths);
            }
            if (e.has("nonexplosion")) {
                Node l = e.child("nonexplosion");
                l.numbers("levels", x.nonexplosion_levels);
                l.number("horizon", x.nonexplosion_horizon);
            }
            if (e.has("lemmas")) {
                Node l = e.child("lemmas");
                l.count("trajectories", x.lemma_trajectories);
                l.number("horizon", x.lemma_horizon);
            }
            if (e.has("truncation")) {
                Node l = e.child("truncation");
                l.count("seeds", x.truncation_seeds);
                l.number("horizon", x.truncation_horizon);
            }
            if (e.has("markov")) {
                Node l = e.child("markov");
                l.count("paths", x.markov_paths);
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, source + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) {
            throw Error(ErrorCode::ConfigError, source + ": " + e.detail());
        }
        throw;
    }
    try {
        finish(cfg, explicit_scenarios);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, source + ": " + e.detail());
    }
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

} // namespace gsfde
