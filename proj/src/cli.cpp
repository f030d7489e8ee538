#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "kolmo/bifurcation.hpp"
#include "kolmo/linstab.hpp"

namespace kolmo::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// values

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    double out = 0.0;
    const auto* end = t.data() + t.size();
    const auto r = std::from_chars(t.data(), end, out);
    if (t.empty() || r.ec != std::errc{} || r.ptr != end)
        throw ValidationError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    long long out = 0;
    const auto* end = t.data() + t.size();
    const auto r = std::from_chars(t.data(), end, out);
    if (t.empty() || r.ec != std::errc{} || r.ptr != end)
        throw ValidationError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

int to_int32(const std::string& key, const std::string& v) {
    const long long x = to_int(key, v);
    if (x < -(1LL << 30) || x > (1LL << 30)) throw ValidationError("config: '" + key + "' out of range");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ValidationError("config: '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(to_double(key, item));
    return out;
}

struct KeyDoc {
    const char* key;
    const char* doc;
};

const KeyDoc kKeys[] = {
    {"lambda", "friction number (>= 0), default 20"},
    {"reynolds", "Reynolds number; eigenfunction/landau/secondary/field default to R_c"},
    {"kx", "streamwise wavenumber, default 0.7"},
    {"walls", "number of wall pairs N (>= 2), default 4"},
    {"jmode", "cross-stream mode j, 1 <= j <= N-1, default 1"},
    {"mx_max", "streamwise truncation |m| <= mx_max (>= 2), default 2"},
    {"c_max", "cross-stream truncation, 0 selects 64 N"},
    {"dt", "requested time step, default 1"},
    {"t_end", "integration time, default 1000"},
    {"steady_tol", "steady residual tolerance, default 1e-10"},
    {"snapshot_every", "time between time-series rows, default 10"},
    {"seed", "seed of the random perturbation, default 1"},
    {"modulo_translation", "steady test allows a uniform drift in x, default false"},
    {"theta", "phase on the circle of secondary states, default 0"},
    {"order", "secondary-state expansion order 1 or 2, default 2"},
    {"r_list", "comma-separated R grid for sigma-curve"},
    {"r_min", "linear R grid start"},
    {"r_max", "linear R grid end"},
    {"r_count", "linear R grid size"},
    {"kx_list", "comma-separated kx grid for neutral-curve"},
    {"kx_min", "linear kx grid start"},
    {"kx_max", "linear kx grid end"},
    {"kx_count", "linear kx grid size"},
    {"grid_nx", "field grid points in x, default 241"},
    {"grid_ny", "field grid points in y, 0 selects 2N*30+1"},
    {"x_periods", "number of x-periods in the field window, default 3"},
    {"source", "field: basic | eigen | secondary | state, default secondary"},
    {"state_file", "final_state.json to sample when source = state"},
    {"initial", "simulate initial data: basic (plus perturbation) | secondary, default basic"},
    {"perturb", "coefficient norm of the random perturbation, default 1e-3"},
    {"stop_at_steady", "simulate stops once steady, default false"},
    {"runs", "sensitivity: number of runs (>= 2), default 4"},
    {"threads", "worker threads, 0 selects hardware concurrency"},
    {"out", "output directory, default ."},
    {"format", "csv | json for tabular outputs, default csv"},
};

}  // namespace

std::string key_help() {
    std::ostringstream os;
    os << "Config keys (file: 'key = value', '#' starts a comment; flags override the file):\n";
    for (const auto& k : kKeys) {
        os << "  " << k.key;
        for (std::size_t i = std::string(k.key).size(); i < 20; ++i) os << ' ';
        os << k.doc << '\n';
    }
    return os.str();
}

void apply_key(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    std::string key = trim(raw_key);
    std::replace(key.begin(), key.end(), '-', '_');
    auto& s = cfg.sim;
    if (key == "lambda") s.phys.lambda = to_double(key, value);
    else if (key == "reynolds") { cfg.reynolds = to_double(key, value); s.phys.reynolds = *cfg.reynolds; }
    else if (key == "kx") s.geom.kx = to_double(key, value);
    else if (key == "walls") s.geom.n_walls = to_int32(key, value);
    else if (key == "jmode") s.geom.j_mode = to_int32(key, value);
    else if (key == "mx_max") s.mx_max = to_int32(key, value);
    else if (key == "c_max") s.c_max = to_int32(key, value);
    else if (key == "dt") s.dt = to_double(key, value);
    else if (key == "t_end") s.t_end = to_double(key, value);
    else if (key == "steady_tol") s.steady_tol = to_double(key, value);
    else if (key == "snapshot_every") s.snapshot_every = to_double(key, value);
    else if (key == "seed") {
        const long long x = to_int(key, value);
        if (x < 0) throw ValidationError("config: 'seed' must be >= 0");
        s.seed = static_cast<std::uint64_t>(x);
    } else if (key == "modulo_translation") s.modulo_translation = to_bool(key, value);
    else if (key == "theta") cfg.theta = to_double(key, value);
    else if (key == "order") cfg.order = to_int32(key, value);
    else if (key == "r_list") cfg.r_list = to_list(key, value);
    else if (key == "r_min") cfg.r_min = to_double(key, value);
    else if (key == "r_max") cfg.r_max = to_double(key, value);
    else if (key == "r_count") cfg.r_count = to_int32(key, value);
    else if (key == "kx_list") cfg.kx_list = to_list(key, value);
    else if (key == "kx_min") cfg.kx_min = to_double(key, value);
    else if (key == "kx_max") cfg.kx_max = to_double(key, value);
    else if (key == "kx_count") cfg.kx_count = to_int32(key, value);
    else if (key == "grid_nx") cfg.grid_nx = to_int32(key, value);
    else if (key == "grid_ny") cfg.grid_ny = to_int32(key, value);
    else if (key == "x_periods") cfg.x_periods = to_double(key, value);
    else if (key == "source") cfg.source = trim(value);
    else if (key == "state_file") cfg.state_file = trim(value);
    else if (key == "initial") cfg.initial = trim(value);
    else if (key == "perturb") cfg.perturb = to_double(key, value);
    else if (key == "stop_at_steady") cfg.stop_at_steady = to_bool(key, value);
    else if (key == "runs") cfg.runs = to_int32(key, value);
    else if (key == "threads") {
        const long long x = to_int(key, value);
        if (x < 0 || x > 4096) throw ValidationError("config: 'threads' must be in [0, 4096]");
        cfg.threads = static_cast<unsigned>(x);
    } else if (key == "out") cfg.out = trim(value);
    else if (key == "format") {
        const std::string f = trim(value);
        if (f == "csv") cfg.format = Format::csv;
        else if (f == "json") cfg.format = Format::json;
        else throw ValidationError("config: 'format' must be csv or json");
    } else throw ValidationError("config: unknown key '" + raw_key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        apply_key(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

void apply_config_file(RunConfig& cfg, const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

namespace {

std::vector<double> linear_grid(const std::vector<double>& list, double lo, double hi, int n) {
    if (!list.empty()) return list;
    std::vector<double> g;
    if (n <= 0) return g;
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
    return g;
}

}  // namespace

std::vector<double> RunConfig::r_grid() const {
    if (r_list.empty() && r_count <= 0 && reynolds) return {*reynolds};
    return linear_grid(r_list, r_min, r_max, r_count);
}

std::vector<double> RunConfig::kx_grid() const {
    auto g = linear_grid(kx_list, kx_min, kx_max, kx_count);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

void RunConfig::validate() const {
    PhysicalParams p = sim.phys;
    p.reynolds = 1.0;
    p.validate();
    if (reynolds) PhysicalParams{sim.phys.lambda, *reynolds}.validate();
    sim.geom.validate();
    if (sim.mx_max < 2) throw ValidationError("mx_max must be >= 2");
    if (sim.c_max < 0) throw ValidationError("c_max must be >= 0");
    if (!(sim.dt > 0.0) || !std::isfinite(sim.dt)) throw ValidationError("dt must be > 0");
    if (!(sim.t_end >= 0.0) || !std::isfinite(sim.t_end)) throw ValidationError("t_end must be >= 0");
    if (!(sim.steady_tol > 0.0)) throw ValidationError("steady_tol must be > 0");
    if (!(sim.snapshot_every > 0.0)) throw ValidationError("snapshot_every must be > 0");
    if (order != 1 && order != 2) throw ValidationError("order must be 1 or 2");
    if (!std::isfinite(theta)) throw ValidationError("theta must be finite");
    if (r_count < 0 || kx_count < 0) throw ValidationError("grid counts must be >= 0");
    for (double r : r_grid())
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("R grid values must be > 0");
    for (double k : kx_grid())
        if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("kx grid values must be > 0");
    if (grid_nx < 2 || grid_ny < 0 || grid_ny == 1) throw ValidationError("field grid needs >= 2 points per direction");
    if (!(x_periods > 0.0) || !std::isfinite(x_periods)) throw ValidationError("x_periods must be > 0");
    if (source != "basic" && source != "eigen" && source != "secondary" && source != "state")
        throw ValidationError("source must be basic, eigen, secondary or state");
    if (initial != "basic" && initial != "secondary") throw ValidationError("initial must be basic or secondary");
    if (!(perturb >= 0.0) || !std::isfinite(perturb)) throw ValidationError("perturb must be >= 0");
    if (runs < 2) throw ValidationError("runs must be >= 2");
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// output

namespace {

/// Buffered output file; lands at its final name only if the command succeeded.
class OutFile {
public:
    OutFile(const RunConfig& cfg, const std::string& name) : path_(cfg.out / name) {}
    std::ostream& stream() { return buf_; }
    fs::path commit(bool ok) {
        fs::create_directories(path_.parent_path().empty() ? fs::path(".") : path_.parent_path());
        fs::path target = path_;
        if (!ok) target += ".partial";
        const fs::path tmp = fs::path(target) += ".tmp";
        {
            std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
            if (!o) throw std::runtime_error("cannot write " + tmp.string());
            const std::string s = buf_.str();
            o.write(s.data(), static_cast<std::streamsize>(s.size()));
            if (!o) throw std::runtime_error("cannot write " + tmp.string());
        }
        fs::rename(tmp, target);
        // a stale file of the other kind would be misleading
        fs::path other = path_;
        if (ok) other += ".partial";
        if (ok) fs::remove(other);
        return target;
    }

private:
    fs::path path_;
    std::ostringstream buf_;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Table {
    std::vector<std::string> cols;
    std::vector<std::vector<double>> rows;
};

void write_table(const Table& t, Format f, std::ostream& os) {
    if (f == Format::csv) {
        for (std::size_t i = 0; i < t.cols.size(); ++i) os << (i ? "," : "") << t.cols[i];
        os << '\n';
        for (const auto& r : t.rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt(r[i]);
            os << '\n';
        }
        return;
    }
    json arr = json::array();
    for (const auto& r : t.rows) {
        json o = json::object();
        for (std::size_t i = 0; i < r.size(); ++i) o[t.cols[i]] = num(r[i]);
        arr.push_back(std::move(o));
    }
    os << arr.dump(2) << '\n';
}

std::string table_name(const std::string& stem, Format f) { return stem + (f == Format::csv ? ".csv" : ".json"); }

void write_grid(const Grid2D& g, std::ostream& os) {
    os << "x,y,psi\n";
    for (std::size_t iy = 0; iy < g.y.size(); ++iy)
        for (std::size_t ix = 0; ix < g.x.size(); ++ix)
            os << fmt(g.x[ix]) << ',' << fmt(g.y[iy]) << ',' << fmt(g.at(ix, iy)) << '\n';
}

Grid2D sample(const RunConfig& cfg, const SpectralField& f) {
    const double half = 0.5 * cfg.x_periods * 2.0 * std::numbers::pi / f.geom().kx;
    return sample_grid(f, cfg.grid_nx, cfg.field_ny(), -half, half);
}

void write_json(OutFile& f, const json& j) { f.stream() << j.dump(2) << '\n'; }

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nt = std::min<std::size_t>(n, threads ? threads : hw);
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nt; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += nt) fn(i);
        });
    for (auto& t : pool) t.join();
}

double reynolds_or_critical(const RunConfig& cfg, double rc) { return cfg.reynolds ? *cfg.reynolds : rc; }

SimConfig sim_config(const RunConfig& cfg) {
    SimConfig s = cfg.sim;
    if (!cfg.reynolds) throw ValidationError("reynolds is required for this subcommand");
    s.phys.reynolds = *cfg.reynolds;
    s.validate();
    return s;
}

json state_json(const SimConfig& s, const SimState& st) {
    json coeffs = json::array();
    const auto& f = st.field;
    for (int m = 0; m <= f.mx_max(); ++m)
        for (int c = 1; c <= f.c_max(); ++c) {
            const cplx a = f(m, c);
            if (a != cplx{}) coeffs.push_back({m, c, a.real(), a.imag()});
        }
    return {{"lambda", s.phys.lambda}, {"reynolds", s.phys.reynolds}, {"kx", s.geom.kx},
            {"walls", s.geom.n_walls}, {"jmode", s.geom.j_mode},   {"mx_max", f.mx_max()},
            {"c_max", f.c_max()},      {"t", st.t},                {"coeffs", coeffs}};
}

SpectralField load_state(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open state file " + path.string());
    json j;
    try {
        in >> j;
        GeometryParams g{j.at("kx").get<double>(), j.at("walls").get<int>(), j.at("jmode").get<int>()};
        g.validate();
        SpectralField f(g, Lattice{j.at("mx_max").get<int>(), j.at("c_max").get<int>()});
        for (const auto& e : j.at("coeffs")) f.set(e.at(0).get<int>(), e.at(1).get<int>(), cplx(e.at(2), e.at(3)));
        return f;
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("malformed state file: ") + ex.what());
    }
}

json params_json(const RunConfig& cfg) {
    return {{"lambda", cfg.sim.phys.lambda}, {"kx", cfg.sim.geom.kx}, {"walls", cfg.sim.geom.n_walls},
            {"jmode", cfg.sim.geom.j_mode}};
}

}  // namespace

// ---------------------------------------------------------------------------
// subcommands

int cmd_sigma_curve(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    require_admissible(cfg.sim.geom);
    const auto grid = cfg.r_grid();
    Table t{{"R", "sigma", "residual"}, std::vector<std::vector<double>>(grid.size())};
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        try {
            const auto e = sigma_of_R(PhysicalParams{cfg.sim.phys.lambda, grid[i]}, cfg.sim.geom);
            t.rows[i] = {grid[i], e.sigma, e.dispersion_residual};
        } catch (const std::exception& ex) {
            t.rows[i] = {grid[i], nan, nan};
            errors[i] = ex.what();
        }
    });
    std::size_t failed = 0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!errors[i].empty()) {
            ++failed;
            log << "R=" << fmt(grid[i]) << ": " << errors[i] << '\n';
        }
    OutFile f(cfg, table_name("sigma_curve", cfg.format));
    write_table(t, cfg.format, f.stream());
    const auto path = f.commit(failed == 0);
    log << "wrote " << path.string() << " (" << grid.size() << " rows, " << failed << " failed)\n";
    return failed ? 3 : 0;
}

int cmd_neutral_curve(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto grid = cfg.kx_grid();
    Table t{{"k_x", "R_c"}, std::vector<std::vector<double>>(grid.size())};
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), cfg.threads, [&](std::size_t i) {
        GeometryParams g = cfg.sim.geom;
        g.kx = grid[i];
        try {
            t.rows[i] = {grid[i], critical_reynolds(cfg.sim.phys.lambda, g)};
        } catch (const std::exception& ex) {
            t.rows[i] = {grid[i], std::numeric_limits<double>::quiet_NaN()};
            errors[i] = ex.what();
        }
    });
    std::size_t failed = 0;
    std::optional<std::size_t> argmin;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!errors[i].empty()) {
            ++failed;
            log << "kx=" << fmt(grid[i]) << ": " << errors[i] << '\n';
            continue;
        }
        if (!argmin || t.rows[i][1] < t.rows[*argmin][1]) argmin = i;
    }
    OutFile f(cfg, table_name("neutral", cfg.format));
    write_table(t, cfg.format, f.stream());
    OutFile side(cfg, "neutral_min.json");
    json j = params_json(cfg);
    j.erase("kx");
    if (argmin) {
        j["index"] = *argmin;
        j["k_x"] = t.rows[*argmin][0];
        j["R_c"] = t.rows[*argmin][1];
    } else {
        j["index"] = nullptr;
    }
    write_json(side, j);
    const auto path = f.commit(failed == 0);
    side.commit(failed == 0);
    log << "wrote " << path.string() << " (" << grid.size() << " rows, " << failed << " failed)\n";
    return failed ? 3 : 0;
}

int cmd_eigenfunction(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const auto& g = cfg.sim.geom;
    const double R = cfg.reynolds ? *cfg.reynolds : critical_reynolds(cfg.sim.phys.lambda, g);
    const auto e = sigma_of_R(PhysicalParams{cfg.sim.phys.lambda, R}, g);
    Table t{{"n", "phi", "phi_star"}, {}};
    for (int n = -e.depth; n <= e.depth; ++n) t.rows.push_back({static_cast<double>(n), e.coeff(n), e.coeff_star(n)});
    OutFile f(cfg, table_name("eigen", cfg.format));
    write_table(t, cfg.format, f.stream());
    const auto ef = eigenfields(g, e);
    OutFile ff(cfg, "eigen_field.csv");
    write_grid(sample(cfg, ef.psi1), ff.stream());
    f.commit(true);
    ff.commit(true);
    log << "R=" << fmt(R) << " sigma=" << fmt(e.sigma) << " depth=" << e.depth << '\n';
    return 0;
}

int cmd_landau(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const double lambda = cfg.sim.phys.lambda;
    const auto d = critical_manifold(lambda, cfg.sim.geom);
    const double R = reynolds_or_critical(cfg, d.reynolds);
    const double mu = R == d.reynolds ? 0.0 : growth_rate(PhysicalParams{lambda, R}, cfg.sim.geom);
    const double ratio = mu / d.landau;
    json j = params_json(cfg);
    j["R_c"] = d.reynolds;
    j["R"] = R;
    j["a"] = d.a_coef;
    j["b"] = d.b_coef;
    j["a_plus_b"] = d.landau;
    j["supercritical"] = d.supercritical();
    j["mu_at_R"] = mu;
    j["epsilon_at_R"] = ratio >= 0.0 ? json(std::sqrt(ratio)) : json(nullptr);
    if (ratio < 0.0) j["note"] = "no steady branch on this side of R_c";
    j["cubic_sum"] = {d.cubic_sum.real(), d.cubic_sum.imag()};
    OutFile f(cfg, "landau.json");
    write_json(f, j);
    log << "wrote " << f.commit(true).string() << '\n';
    return 0;
}

int cmd_secondary(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const double lambda = cfg.sim.phys.lambda;
    const auto d = critical_manifold(lambda, cfg.sim.geom);
    const double R = reynolds_or_critical(cfg, d.reynolds);
    const auto s = secondary_flow(d, lambda, R, cfg.theta, cfg.order, cfg.sim.lattice());
    json j = params_json(cfg);
    j["R_c"] = d.reynolds;
    j["R"] = R;
    j["mu"] = s.mu;
    j["amplitude"] = s.amplitude;
    j["theta"] = s.theta;
    j["order"] = s.order;
    j["exists"] = s.exists;
    j["large_amplitude"] = s.large_amplitude;
    j["note"] = s.note;
    SimConfig sc = cfg.sim;
    sc.phys.reynolds = R;
    j["steady_residual"] = steady_residual(sc, s.field);
    OutFile f(cfg, "secondary.json");
    write_json(f, j);
    OutFile ff(cfg, "secondary_field.csv");
    write_grid(sample(cfg, s.field), ff.stream());
    f.commit(true);
    ff.commit(true);
    if (!s.note.empty()) log << s.note << '\n';
    log << "amplitude=" << fmt(s.amplitude) << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const SimConfig sc = sim_config(cfg);
    SpectralField init;
    if (cfg.initial == "secondary") {
        const auto d = critical_manifold(sc.phys.lambda, sc.geom);
        const auto s = secondary_flow(d, sc.phys.lambda, sc.phys.reynolds, cfg.theta, cfg.order, sc.lattice());
        if (!s.exists) log << "initial data: " << s.note << '\n';
        init = s.field;
    } else {
        init = random_perturbed_basic_flow(sc, sc.seed, cfg.perturb);
    }
    Table t{{"t", "E_total", "E_pert", "amp_m1", "residual"}, {}};
    auto row = [&](const SimState& st) {
        const auto split = energy_split(st.field, sc.phys.lambda);
        const double res = std::isnan(st.residual) ? state_residual(sc, st.field) : st.residual;
        t.rows.push_back({st.t, total_energy(st.field), perturbation_energy(st.field, sc.phys.lambda),
                          std::sqrt(split.size() > 1 ? split[1] : 0.0), res});
    };
    OutFile ts(cfg, table_name("timeseries", cfg.format));
    SimState final_state;
    bool converged = false;
    try {
        if (cfg.stop_at_steady) {
            const auto r = run_to_steady(sc, init, row);
            final_state = r.state;
            converged = r.converged;
        } else {
            SimState s = initial_state(sc, init);
            row(s);
            final_state = integrate(sc, s, sc.t_end, [&](const SimState& st) { row(st); });
            final_state.residual = state_residual(sc, final_state.field);
            converged = final_state.residual < sc.steady_tol;
        }
    } catch (const BlowUpError& ex) {
        write_table(t, cfg.format, ts.stream());
        log << ex.what() << "; wrote " << ts.commit(false).string() << '\n';
        return 3;
    }
    write_table(t, cfg.format, ts.stream());
    OutFile ff(cfg, "final_field.csv");
    write_grid(sample(cfg, final_state.field), ff.stream());
    json j = state_json(sc, final_state);
    j["converged"] = converged;
    j["residual"] = final_state.residual;
    j["drift_speed"] = comoving_residual(sc, final_state.field).speed;
    j["energy_split"] = energy_split(final_state.field, sc.phys.lambda);
    OutFile sf(cfg, "final_state.json");
    write_json(sf, j);
    ts.commit(true);
    ff.commit(true);
    sf.commit(true);
    log << "t=" << fmt(final_state.t) << " residual=" << fmt(final_state.residual)
        << (converged ? " (steady)" : "") << '\n';
    return 0;
}

int cmd_field(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const double lambda = cfg.sim.phys.lambda;
    const auto& g = cfg.sim.geom;
    SpectralField f;
    if (cfg.source == "state") {
        if (cfg.state_file.empty()) throw ValidationError("source = state needs state_file");
        f = load_state(cfg.state_file);
    } else if (cfg.source == "basic") {
        f = basic_flow(g, lambda, cfg.sim.lattice());
    } else if (cfg.source == "eigen") {
        const double R = cfg.reynolds ? *cfg.reynolds : critical_reynolds(lambda, g);
        f = eigenfields(g, sigma_of_R(PhysicalParams{lambda, R}, g)).psi1;
    } else {
        const auto d = critical_manifold(lambda, g);
        const auto s = secondary_flow(d, lambda, reynolds_or_critical(cfg, d.reynolds), cfg.theta, cfg.order,
                                      cfg.sim.lattice());
        if (!s.note.empty()) log << s.note << '\n';
        f = s.field;
    }
    OutFile ff(cfg, "field.csv");
    write_grid(sample(cfg, f), ff.stream());
    log << "wrote " << ff.commit(true).string() << '\n';
    return 0;
}

int cmd_sensitivity(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    const SimConfig sc = sim_config(cfg);
    const auto rep = sensitivity_run(sc, cfg.runs, cfg.perturb, cfg.threads);
    bool ok = true;
    Table t{{"t"}, {}};
    for (const auto& [i, j] : rep.pairs) t.cols.push_back("d_" + std::to_string(i) + "_" + std::to_string(j));
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        std::vector<double> r{rep.times[k]};
        for (const auto& row : rep.pair_distance) r.push_back(row[k]);
        t.rows.push_back(std::move(r));
    }
    json runs = json::array();
    for (const auto& r : rep.runs) {
        json o{{"id", r.id}, {"seed", sc.seed + static_cast<std::uint64_t>(r.id)}, {"blew_up", r.blew_up}};
        if (r.blew_up) {
            ok = false;
            o["error"] = r.error;
            log << "run " << r.id << ": " << r.error << '\n';
        } else {
            o["end_spectrum"] = r.end_spectrum;
            o["final_residual"] = state_residual(sc, r.final_state.field);
        }
        runs.push_back(std::move(o));
    }
    json j = params_json(cfg);
    j["reynolds"] = sc.phys.reynolds;
    j["runs"] = runs;
    j["max_final_distance"] = rep.max_final_distance();
    json finals = json::array();
    for (std::size_t k = 0; k < rep.pairs.size(); ++k)
        finals.push_back({{"pair", {rep.pairs[k].first, rep.pairs[k].second}},
                          {"distance", rep.pair_distance[k].empty() ? json(nullptr) : json(rep.pair_distance[k].back())}});
    j["final_distances"] = finals;
    OutFile tf(cfg, table_name("sensitivity", cfg.format));
    write_table(t, cfg.format, tf.stream());
    OutFile jf(cfg, "sensitivity.json");
    write_json(jf, j);
    for (const auto& r : rep.runs) {
        if (r.blew_up) continue;
        OutFile ff(cfg, "end_field_" + std::to_string(r.id) + ".csv");
        write_grid(sample(cfg, r.final_state.field), ff.stream());
        ff.commit(true);
    }
    tf.commit(ok);
    jf.commit(ok);
    log << "max final distance " << fmt(rep.max_final_distance()) << '\n';
    return ok ? 0 : 3;
}

// ---------------------------------------------------------------------------
// entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wall-bounded Kolmogorov flow with linear friction: spectra, bifurcation and dynamics"};
    app.footer(key_help());
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--set", sets, "override any config key, key=value (repeatable)");

    // flag -> key; values are applied after the config file
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"--out", "out"},       {"--lambda", "lambda"}, {"--reynolds", "reynolds"}, {"--kx", "kx"},
        {"--walls", "walls"},   {"--jmode", "jmode"},   {"--mx-max", "mx_max"},     {"--c-max", "c_max"},
        {"--dt", "dt"},         {"--t-end", "t_end"},   {"--seed", "seed"},         {"--theta", "theta"},
        {"--format", "format"},
    };
    std::vector<std::string> values(flags.size());
    std::vector<CLI::Option*> opts;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        std::string doc = "config key " + flags[i].second;
        for (const auto& k : kKeys)
            if (flags[i].second == k.key) doc = k.doc;
        opts.push_back(app.add_option(flags[i].first, values[i], doc));
    }

    const std::vector<std::pair<std::string, std::function<int(const RunConfig&, std::ostream&)>>> subs = {
        {"sigma-curve", cmd_sigma_curve},     {"neutral-curve", cmd_neutral_curve}, {"eigenfunction", cmd_eigenfunction},
        {"landau", cmd_landau},               {"secondary", cmd_secondary},         {"simulate", cmd_simulate},
        {"field", cmd_field},                 {"sensitivity", cmd_sensitivity},
    };
    const std::map<std::string, std::string> sub_help = {
        {"sigma-curve", "sigma(R) over an R grid -> sigma_curve.csv"},
        {"neutral-curve", "R_c(kx) over a kx grid -> neutral.csv + neutral_min.json"},
        {"eigenfunction", "critical eigenvector coefficients -> eigen.csv + eigen_field.csv"},
        {"landau", "Landau coefficients -> landau.json"},
        {"secondary", "secondary steady state from the reduced equation -> secondary.json + secondary_field.csv"},
        {"simulate", "time integration -> timeseries.csv, final_field.csv, final_state.json"},
        {"field", "sample a field on the plotting grid -> field.csv"},
        {"sensitivity", "seeded ensemble and pairwise distances -> sensitivity.csv/json, end_field_*.csv"},
    };
    for (const auto& [name, fn] : subs) {
        auto* sc = app.add_subcommand(name, sub_help.at(name));
        sc->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) apply_config_file(cfg, config_path);
        for (std::size_t i = 0; i < flags.size(); ++i)
            if (opts[i]->count()) apply_key(cfg, flags[i].second, values[i]);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
            apply_key(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [name, fn] : subs)
            if (app.got_subcommand(name)) return fn(cfg, err);
        return 2;
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace kolmo::cli
