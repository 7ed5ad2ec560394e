#include "membrane/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "membrane/io.hpp"

namespace membrane {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Ordered key/value pairs; duplicate keys are rejected at lookup time.
using KvList = std::vector<std::pair<std::string, std::string>>;

KvList tokenize(const std::string& text) {
    KvList out;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected `key = value`");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

class KvReader {
  public:
    explicit KvReader(KvList kv) : kv_(std::move(kv)), used_(kv_.size(), false) {}

    bool has(const std::string& key) const {
        return std::any_of(kv_.begin(), kv_.end(),
                           [&](const auto& p) { return p.first == key; });
    }

    std::string raw(const std::string& key) {
        const std::string* found = nullptr;
        for (size_t i = 0; i < kv_.size(); ++i) {
            if (kv_[i].first != key) continue;
            if (found) throw ConfigError(key, "duplicate key");
            found = &kv_[i].second;
            used_[i] = true;
        }
        if (!found) throw ConfigError(key, "missing required key");
        return *found;
    }

    double number(const std::string& key) {
        const std::string v = raw(key);
        try {
            size_t pos = 0;
            const double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return x;
        } catch (const std::exception&) {
            throw ConfigError(key, "expected a number, got `" + v + "`");
        }
    }

    double number_or(const std::string& key, double fallback) {
        return has(key) ? number(key) : fallback;
    }

    long integer(const std::string& key) {
        const double x = number(key);
        if (x != std::floor(x)) throw ConfigError(key, "expected an integer");
        return static_cast<long>(x);
    }

    long integer_or(const std::string& key, long fallback) {
        return has(key) ? integer(key) : fallback;
    }

    std::string word(const std::string& key) { return raw(key); }

    std::vector<std::string> tokens(const std::string& key) {
        std::string v = raw(key);
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream ss(v);
        std::vector<std::string> out;
        std::string tok;
        while (ss >> tok) out.push_back(tok);
        return out;
    }

    std::vector<double> numbers(const std::string& key) {
        std::vector<double> out;
        for (const auto& tok : tokens(key)) {
            try {
                size_t pos = 0;
                out.push_back(std::stod(tok, &pos));
                if (pos != tok.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ConfigError(key, "expected numbers, got `" + tok + "`");
            }
        }
        return out;
    }

    void reject_unknown() const {
        for (size_t i = 0; i < kv_.size(); ++i) {
            if (!used_[i]) throw ConfigError(kv_[i].first, "unknown key");
        }
    }

  private:
    KvList kv_;
    std::vector<bool> used_;
};

PotentialSpec read_potential(KvReader& kv) {
    const std::string kind = kv.word("potential.kind");
    PotentialSpec spec;
    if (kind == "polynomial") {
        PolynomialPotential p;
        p.a4 = kv.number("potential.a4");
        p.a2 = kv.number("potential.a2");
        p.a0 = kv.number_or("potential.a0", 0.0);
        p.mu0 = kv.number_or("potential.mu0", 0.0);
        if (!(p.a4 > 0.0)) throw ConfigError("potential.a4", "must be positive");
        if (!(p.a2 > 0.0)) throw ConfigError("potential.a2", "must be positive");
        spec.variant = p;
    } else if (kind == "log_extended" || kind == "moreau_yosida") {
        LogExtendedPotential p;
        p.theta = kv.number("potential.theta");
        p.theta_c = kv.number("potential.theta_c");
        p.mu0 = kv.number_or("potential.mu0", 0.0);
        p.delta = kv.number_or("potential.delta", 0.02);
        if (!(p.theta > 0.0 && p.theta < p.theta_c)) {
            throw ConfigError("potential.theta", "requires 0 < theta < theta_c");
        }
        if (!(p.delta > 0.0 && p.delta < 1.0)) {
            throw ConfigError("potential.delta", "must lie in (0, 1)");
        }
        if (kind == "moreau_yosida") {
            MoreauYosidaPotential my;
            my.base = p;
            my.lambda = kv.number("potential.yosida_lambda");
            if (!(my.lambda > 0.0)) {
                throw ConfigError("potential.yosida_lambda", "must be positive");
            }
            spec.variant = my;
        } else {
            spec.variant = p;
        }
    } else {
        throw ConfigError("potential.kind",
                          "unknown potential `" + kind +
                              "` (expected polynomial, log_extended or moreau_yosida)");
    }
    return spec;
}

RunConfig config_from_reader(KvReader& kv) {
    RunConfig c;
    c.mesh_n = static_cast<int>(kv.integer("mesh.n"));
    if (c.mesh_n < 4) throw ConfigError("mesh.n", "must be at least 4");

    c.tau = kv.number("time.tau");
    if (!(c.tau > 0.0)) throw ConfigError("time.tau", "must be positive");
    c.t_end = kv.number("time.t_end");
    if (!(c.t_end >= c.tau)) throw ConfigError("time.t_end", "must be at least time.tau");

    c.eps = kv.number("params.eps");
    if (!(c.eps > 0.0)) throw ConfigError("params.eps", "must be positive");
    c.kappa = kv.number("params.kappa");
    if (!(c.kappa > 0.0)) throw ConfigError("params.kappa", "must be positive");

    const bool isotropic = kv.has("params.sigma") || kv.has("params.lambda");
    const bool matrix_form = kv.has("params.g11") || kv.has("params.l11");
    if (isotropic && matrix_form) {
        throw ConfigError("params.sigma", "give either sigma/lambda or matrix entries, not both");
    }
    if (isotropic) {
        c.sigma = kv.number("params.sigma");
        c.lambda = kv.number("params.lambda");
        if (!(*c.sigma > 0.0)) throw ConfigError("params.sigma", "must be positive");
        if (!(*c.lambda >= 0.0)) throw ConfigError("params.lambda", "must be nonnegative");
        c.G = *c.sigma * Eigen::Matrix2d::Identity();
        c.L = *c.lambda * Eigen::Matrix2d::Identity();
    } else if (matrix_form) {
        c.G << kv.number("params.g11"), kv.number("params.g12"), kv.number("params.g12"),
            kv.number("params.g22");
        c.L << kv.number("params.l11"), kv.number("params.l12"), kv.number("params.l12"),
            kv.number("params.l22");
        if (c.G(0, 0) <= 0.0 || c.G.determinant() <= 0.0) {
            throw ConfigError("params.g11", "G must be positive definite");
        }
        if (!c.L.isZero(0.0) && (c.L(0, 0) <= 0.0 || c.L.determinant() <= 0.0)) {
            throw ConfigError("params.l11", "L must be zero or positive definite");
        }
    } else {
        throw ConfigError("params.sigma", "missing required key");
    }

    c.potential = read_potential(kv);

    c.mean_u = kv.number("init.mean_u");
    c.amplitude = kv.number_or("init.amplitude", 0.2);
    if (!(c.amplitude >= 0.0)) throw ConfigError("init.amplitude", "must be nonnegative");
    if (kv.has("init.seed")) {
        const long s = kv.integer("init.seed");
        if (s < 0) throw ConfigError("init.seed", "must be nonnegative");
        c.seed = static_cast<uint64_t>(s);
    }
    c.h0_const = kv.number_or("init.h0_const", 0.0);

    c.solver.newton_tol = kv.number_or("solver.newton_tol", c.solver.newton_tol);
    c.solver.minres_tol = kv.number_or("solver.minres_tol", c.solver.minres_tol);
    c.solver.max_newton = static_cast<int>(kv.integer_or("solver.max_newton", c.solver.max_newton));
    c.solver.outer_cg_tol = kv.number_or("solver.outer_cg_tol", c.solver.outer_cg_tol);
    if (!(c.solver.newton_tol > 0.0)) throw ConfigError("solver.newton_tol", "must be positive");
    if (!(c.solver.minres_tol > 0.0)) throw ConfigError("solver.minres_tol", "must be positive");
    if (c.solver.max_newton < 1) throw ConfigError("solver.max_newton", "must be at least 1");
    if (!(c.solver.outer_cg_tol > 0.0)) {
        throw ConfigError("solver.outer_cg_tol", "must be positive");
    }

    if (kv.has("output.dir")) c.output_dir = kv.word("output.dir");
    c.every_steps = kv.integer_or("output.every_steps", 100);
    if (c.every_steps < 1) throw ConfigError("output.every_steps", "must be at least 1");
    if (kv.has("output.formats")) {
        c.formats.clear();
        for (const auto& tok : kv.tokens("output.formats")) {
            if (tok == "csv") {
                c.formats.push_back(OutputFormat::csv);
            } else if (tok == "pgm") {
                c.formats.push_back(OutputFormat::pgm);
            } else if (tok == "vtk") {
                c.formats.push_back(OutputFormat::vtk);
            } else if (tok == "raw") {
                c.formats.push_back(OutputFormat::raw);
            } else {
                throw ConfigError("output.formats", "unknown format `" + tok + "`");
            }
        }
    }

    c.pattern_threshold = kv.number_or("pattern.threshold", 0.0);
    c.pattern.area_high = kv.number_or("pattern.area_high", c.pattern.area_high);
    c.pattern.area_low = kv.number_or("pattern.area_low", c.pattern.area_low);
    c.pattern.dot_elongation = kv.number_or("pattern.dot_elongation", c.pattern.dot_elongation);
    c.pattern.stripe_elongation =
        kv.number_or("pattern.stripe_elongation", c.pattern.stripe_elongation);
    c.pattern.min_dot_components = static_cast<int>(
        kv.integer_or("pattern.min_dot_components", c.pattern.min_dot_components));
    c.pattern.elongation_cap = kv.number_or("pattern.elongation_cap", c.pattern.elongation_cap);

    return c;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    KvReader kv(tokenize(text));
    RunConfig c = config_from_reader(kv);
    kv.reject_unknown();
    return c;
}

ModelParams RunConfig::model_params() const {
    ModelParams p;
    p.eps = eps;
    p.kappa = kappa;
    p.tau = tau;
    p.G = G;
    p.L = L;
    p.potential = potential;
    p.validate();
    return p;
}

long RunConfig::step_count() const {
    return static_cast<long>(std::ceil(t_end / tau - 1e-9));
}

bool RunConfig::operator==(const RunConfig& o) const {
    auto same = [](const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
        return (a.array() == b.array()).all();
    };
    return mesh_n == o.mesh_n && tau == o.tau && t_end == o.t_end && eps == o.eps &&
           kappa == o.kappa && sigma == o.sigma && lambda == o.lambda && same(G, o.G) &&
           same(L, o.L) && potential == o.potential && mean_u == o.mean_u &&
           amplitude == o.amplitude && seed == o.seed && h0_const == o.h0_const &&
           solver.newton_tol == o.solver.newton_tol && solver.minres_tol == o.solver.minres_tol &&
           solver.max_newton == o.solver.max_newton &&
           solver.outer_cg_tol == o.solver.outer_cg_tol && output_dir == o.output_dir &&
           every_steps == o.every_steps && formats == o.formats &&
           pattern_threshold == o.pattern_threshold && pattern.area_high == o.pattern.area_high &&
           pattern.area_low == o.pattern.area_low &&
           pattern.dot_elongation == o.pattern.dot_elongation &&
           pattern.stripe_elongation == o.pattern.stripe_elongation &&
           pattern.min_dot_components == o.pattern.min_dot_components &&
           pattern.elongation_cap == o.pattern.elongation_cap;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    auto line = [&](const std::string& key, const std::string& value) {
        out << key << " = " << value << "\n";
    };
    auto num = [&](const std::string& key, double v) { line(key, format_double(v)); };

    line("mesh.n", std::to_string(c.mesh_n));
    num("time.tau", c.tau);
    num("time.t_end", c.t_end);
    num("params.eps", c.eps);
    num("params.kappa", c.kappa);
    if (c.sigma && c.lambda) {
        num("params.sigma", *c.sigma);
        num("params.lambda", *c.lambda);
    } else {
        num("params.g11", c.G(0, 0));
        num("params.g12", c.G(0, 1));
        num("params.g22", c.G(1, 1));
        num("params.l11", c.L(0, 0));
        num("params.l12", c.L(0, 1));
        num("params.l22", c.L(1, 1));
    }
    if (const auto* p = std::get_if<PolynomialPotential>(&c.potential.variant)) {
        line("potential.kind", "polynomial");
        num("potential.a4", p->a4);
        num("potential.a2", p->a2);
        num("potential.a0", p->a0);
        num("potential.mu0", p->mu0);
    } else if (const auto* p = std::get_if<LogExtendedPotential>(&c.potential.variant)) {
        line("potential.kind", "log_extended");
        num("potential.theta", p->theta);
        num("potential.theta_c", p->theta_c);
        num("potential.mu0", p->mu0);
        num("potential.delta", p->delta);
    } else if (const auto* p = std::get_if<MoreauYosidaPotential>(&c.potential.variant)) {
        line("potential.kind", "moreau_yosida");
        num("potential.theta", p->base.theta);
        num("potential.theta_c", p->base.theta_c);
        num("potential.mu0", p->base.mu0);
        num("potential.delta", p->base.delta);
        num("potential.yosida_lambda", p->lambda);
    }
    num("init.mean_u", c.mean_u);
    num("init.amplitude", c.amplitude);
    line("init.seed", std::to_string(c.seed));
    num("init.h0_const", c.h0_const);
    num("solver.newton_tol", c.solver.newton_tol);
    num("solver.minres_tol", c.solver.minres_tol);
    line("solver.max_newton", std::to_string(c.solver.max_newton));
    num("solver.outer_cg_tol", c.solver.outer_cg_tol);
    line("output.dir", c.output_dir);
    line("output.every_steps", std::to_string(c.every_steps));
    std::string formats;
    for (const auto f : c.formats) {
        if (!formats.empty()) formats += ",";
        switch (f) {
            case OutputFormat::csv: formats += "csv"; break;
            case OutputFormat::pgm: formats += "pgm"; break;
            case OutputFormat::vtk: formats += "vtk"; break;
            case OutputFormat::raw: formats += "raw"; break;
        }
    }
    line("output.formats", formats);
    num("pattern.threshold", c.pattern_threshold);
    num("pattern.area_high", c.pattern.area_high);
    num("pattern.area_low", c.pattern.area_low);
    num("pattern.dot_elongation", c.pattern.dot_elongation);
    num("pattern.stripe_elongation", c.pattern.stripe_elongation);
    line("pattern.min_dot_components", std::to_string(c.pattern.min_dot_components));
    num("pattern.elongation_cap", c.pattern.elongation_cap);
    return out.str();
}

SweepConfig parse_sweep_config(const std::string& text) {
    KvList all = tokenize(text);
    KvList sweep_keys, base_keys;
    for (auto& kv : all) {
        if (kv.first.rfind("sweep.", 0) == 0) {
            sweep_keys.push_back(kv);
        } else {
            base_keys.push_back(kv);
        }
    }

    SweepConfig sweep;
    {
        KvReader base(std::move(base_keys));
        sweep.base = config_from_reader(base);
        base.reject_unknown();
    }
    KvReader kv(std::move(sweep_keys));
    for (int axis = 1; axis <= 2; ++axis) {
        const std::string prefix = "sweep.axis" + std::to_string(axis);
        if (!kv.has(prefix + ".path")) continue;
        SweepAxis a;
        a.path = kv.word(prefix + ".path");
        a.values = kv.numbers(prefix + ".values");
        if (a.values.empty()) throw ConfigError(prefix + ".values", "needs at least one value");
        sweep.axes.push_back(std::move(a));
    }
    sweep.workers = static_cast<int>(kv.integer_or("sweep.workers", 1));
    if (sweep.workers < 1) throw ConfigError("sweep.workers", "must be at least 1");
    sweep.max_cells = static_cast<int>(kv.integer_or("sweep.max_cells", 64));
    kv.reject_unknown();

    size_t cells = 1;
    for (const auto& a : sweep.axes) cells *= a.values.size();
    if (cells > static_cast<size_t>(sweep.max_cells)) {
        throw ConfigError("sweep.max_cells", "sweep grid exceeds the configured cap");
    }

    // Validate the axis paths against the base config up front.
    for (const auto& a : sweep.axes) {
        RunConfig probe = sweep.base;
        apply_override(probe, a.path, a.values.front());
    }
    return sweep;
}

void apply_override(RunConfig& c, const std::string& path, double value) {
    auto as_int = [&](const char* what) {
        if (value != std::floor(value)) throw ConfigError(path, std::string(what) + " must be an integer");
        return static_cast<long>(value);
    };
    if (path == "mesh.n") {
        c.mesh_n = static_cast<int>(as_int("mesh.n"));
        if (c.mesh_n < 4) throw ConfigError(path, "must be at least 4");
    } else if (path == "time.tau") {
        c.tau = value;
    } else if (path == "time.t_end") {
        c.t_end = value;
    } else if (path == "params.eps") {
        c.eps = value;
    } else if (path == "params.kappa") {
        c.kappa = value;
    } else if (path == "params.sigma") {
        if (!c.sigma) throw ConfigError(path, "config is not isotropic");
        c.sigma = value;
        c.G = value * Eigen::Matrix2d::Identity();
    } else if (path == "params.lambda") {
        if (!c.lambda) throw ConfigError(path, "config is not isotropic");
        c.lambda = value;
        c.L = value * Eigen::Matrix2d::Identity();
    } else if (path == "init.mean_u") {
        c.mean_u = value;
    } else if (path == "init.amplitude") {
        c.amplitude = value;
    } else if (path == "init.seed") {
        const long s = as_int("init.seed");
        if (s < 0) throw ConfigError(path, "must be nonnegative");
        c.seed = static_cast<uint64_t>(s);
    } else if (path == "init.h0_const") {
        c.h0_const = value;
    } else if (path == "potential.theta" || path == "potential.theta_c" ||
               path == "potential.mu0" || path == "potential.delta") {
        LogExtendedPotential* p = std::get_if<LogExtendedPotential>(&c.potential.variant);
        if (auto* my = std::get_if<MoreauYosidaPotential>(&c.potential.variant)) p = &my->base;
        if (!p) throw ConfigError(path, "potential is not logarithmic");
        if (path == "potential.theta") p->theta = value;
        if (path == "potential.theta_c") p->theta_c = value;
        if (path == "potential.mu0") p->mu0 = value;
        if (path == "potential.delta") p->delta = value;
    } else {
        throw ConfigError(path, "unknown or non-sweepable key");
    }
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file `" + path + "`");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

SweepConfig load_sweep_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file `" + path + "`");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sweep_config(buf.str());
}

PhysicalUnits physical_units(const ModelParams& params) {
    constexpr double x_c = 1e-6;  // meters
    PhysicalUnits units;
    units.energy_scale_J = 5e-19 / params.eps;
    const auto spectral_norm = [](const Eigen::Matrix2d& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
        return es.eigenvalues().cwiseAbs().maxCoeff();
    };
    units.lambda_J_per_m = spectral_norm(params.L) * units.energy_scale_J / x_c;
    units.sigma_J_per_m2 = spectral_norm(params.G) * units.energy_scale_J / (x_c * x_c);
    units.kappa_J = params.kappa * units.energy_scale_J;
    return units;
}

}  // namespace membrane
