// rotor-dyn: command-line driver for the kicked-rotor simulations.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rotordyn/rotordyn.hpp"

namespace fs = std::filesystem;
using namespace rotordyn;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_io = 1;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;

struct Output {
    fs::path dir;
    bool json = false;
    Metadata meta;

    void emit(Table t, const std::string& name) const
    {
        Metadata m = meta;
        for (auto& kv : t.metadata) {
            const bool dup = std::any_of(meta.begin(), meta.end(), [&](const auto& x) { return x.first == kv.first; });
            if (!dup) m.push_back(std::move(kv));
        }
        // The creation time stays the last metadata line.
        std::stable_partition(m.begin(), m.end(), [](const auto& kv) { return kv.first != "created"; });
        t.metadata = std::move(m);
        write_csv(t, dir / (name + ".csv"));
        if (json) write_json(t, dir / (name + ".json"));
    }
};

Table fit_table(const std::vector<std::pair<std::string, PowerLawFit>>& fits)
{
    Table t;
    t.columns = {"quantity", "exponent", "stderr_exponent", "prefactor_log", "t_min", "t_max", "samples"};
    for (const auto& [name, f] : fits)
        t.add_row({name, f.exponent, f.stderr_exponent, f.prefactor_log, f.t_min, f.t_max, static_cast<std::int64_t>(f.samples)});
    return t;
}

std::pair<std::int64_t, std::int64_t> fit_window(const RunConfig& cfg, std::int64_t first, std::int64_t last)
{
    return {cfg.fit_t_min.value_or(first), cfg.fit_t_max.value_or(last)};
}

void run_evolve(const RunConfig& cfg, const Output& out)
{
    const auto res = evolve(momentum_eigenstate(cfg.params, cfg.m0), cfg.n_kicks, cfg.record_every, cfg.noise, cfg.propagation);
    Table e = series_table(res.energy, {{"e_infinite_temperature", format_double(infinite_temperature_energy(cfg.params))},
                                        {"max_norm_drift", format_double(res.max_norm_drift)},
                                        {"edge_warning_at", res.edge_warning_at ? std::to_string(*res.edge_warning_at) : "none"}});
    out.emit(std::move(e), "energy");
    out.emit(series_table(res.F, {}, "F"), "F");

    std::vector<std::pair<std::string, PowerLawFit>> fits;
    std::optional<TimeSeries> sigma;
    if (cfg.record_every == 1 && res.F.size() >= 2 * static_cast<std::size_t>(cfg.coarse.window) + 1 && cfg.params.epsilon != 0.0) {
        sigma = sigma_series(res.F, cfg.coarse, cfg.params.epsilon, cfg.params.K);
        out.emit(series_table(*sigma, {}, "sigma"), "sigma");
    }
    if (cfg.fit_t_min || cfg.fit_t_max) {
        const auto [lo, hi] = fit_window(cfg, 1, cfg.n_kicks);
        fits.emplace_back("energy", fit_power_law(res.energy, lo, hi));
        if (sigma) fits.emplace_back("sigma", fit_power_law(*sigma, lo, hi));
        out.emit(fit_table(fits), "fit");
    }
    std::printf("evolve: %lld kicks, final e = %.6g (e_inf = %.6g)\n", static_cast<long long>(cfg.n_kicks), res.energy.values.back(),
                infinite_temperature_energy(cfg.params));
    for (const auto& [name, f] : fits) std::printf("  %s exponent = %.4f +- %.4f on [%lld, %lld]\n", name.c_str(), f.exponent, f.stderr_exponent,
                                                   static_cast<long long>(f.t_min), static_cast<long long>(f.t_max));
}

void run_lyapunov(const RunConfig& cfg, const Output& out)
{
    std::vector<int> Ms = cfg.M_list.empty() ? std::vector<int>{cfg.params.M} : cfg.M_list;
    Table plateaus;
    plateaus.columns = {"L", "M", "plateau", "final_lambda", "max_rescale_error", "underflows"};
    for (int M : Ms) {
        auto p = cfg.params;
        p.M = M;
        const auto run = benettin_run(p, cfg.lyapunov);
        const std::string tag = "_M" + std::to_string(M);
        out.emit(series_table(run.lambda, {{"run_M", std::to_string(M)}}, "lambda"), "lambda" + tag);
        const auto lm = lambda_vs_m(run.lambda, run.energy, p.kbar);
        Table t;
        t.metadata = {{"run_M", std::to_string(M)}};
        t.columns = {"T", "m", "lambda"};
        for (std::size_t i = 0; i < lm.m.size(); ++i) t.add_row({lm.times[i], lm.m[i], lm.lambda[i]});
        out.emit(std::move(t), "lambda_vs_m" + tag);
        plateaus.add_row({std::int64_t{p.size()}, std::int64_t{M}, run.plateau, run.final_lambda, run.max_rescale_error, run.underflows});
        std::printf("lyapunov: M=%d plateau = %.6g, lambda(T) = %.6g\n", M, run.plateau, run.final_lambda);
    }
    out.emit(std::move(plateaus), "plateau");
}

void run_nekhoroshev(const RunConfig& cfg, const Output& out)
{
    auto nc = cfg.nekhoroshev;
    nc.threads = thread_count();
    const auto res = nekhoroshev_experiment(cfg.params, nc);
    Table fits;
    fits.metadata = {{"a_exponent", format_double(res.a_exponent)}, {"a_stderr", format_double(res.a_stderr)}, {"b", format_double(res.b)}};
    fits.columns = {"epsilon", "A", "A_stderr", "B", "B_stderr", "fitted_modes", "shrunk_windows", "t_star"};
    for (std::size_t e = 0; e < res.per_eps.size(); ++e) {
        const auto& pe = res.per_eps[e];
        Table eta;
        eta.metadata = {{"epsilon", format_double(pe.epsilon)}};
        eta.columns = {"t"};
        for (Eigen::Index j = 0; j < pe.eta.rows(); ++j) eta.columns.push_back("mode_" + std::to_string(j));
        for (std::size_t k = 0; k < res.times.size(); ++k) {
            std::vector<Cell> row{res.times[k]};
            for (Eigen::Index j = 0; j < pe.eta.rows(); ++j) row.emplace_back(pe.eta(j, static_cast<Eigen::Index>(k)));
            eta.add_row(std::move(row));
        }
        out.emit(std::move(eta), "eta_eps" + std::to_string(e));
        fits.add_row({pe.epsilon, pe.A, pe.A_stderr, pe.B, pe.B_stderr, std::int64_t{pe.fitted_modes}, std::int64_t{pe.shrunk_windows}, pe.t_star});
        std::printf("nekhoroshev: eps=%g A=%.4f B=%.4f t*=%.4g (%d modes)\n", pe.epsilon, pe.A, pe.B, pe.t_star, pe.fitted_modes);
    }
    out.emit(std::move(fits), "fits");
    std::printf("nekhoroshev: a = %.4f +- %.4f\n", res.a_exponent, res.a_stderr);
}

void run_ed_scan(const RunConfig& cfg, const Output& out)
{
    const ManyBodyParams mbp{cfg.N, cfg.params.M, cfg.params.K, cfg.params.epsilon, cfg.params.kbar};
    auto ec = cfg.ed;
    ec.threads = thread_count();
    ec.keep_spectra = cfg.dump_quasienergies;
    const auto rows = r_vs_K_scan(mbp, cfg.K_grid, ec);
    Table t;
    t.metadata = {{"N", std::to_string(cfg.N)}, {"r_poisson", format_double(r_poisson)}, {"r_coe", format_double(r_coe_reference)}};
    t.columns = {"K", "r", "r_stderr", "dim", "converged", "r_next"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        t.add_row({r.K, r.r, r.r_stderr, static_cast<std::int64_t>(r.dim), std::int64_t{r.converged ? 1 : 0},
                   r.r_next.value_or(std::numeric_limits<double>::quiet_NaN())});
        std::printf("ed-scan: K=%g r=%.4f dim=%zu%s\n", r.K, r.r, r.dim, r.r_next ? (r.converged ? " converged" : " not converged") : "");
        if (cfg.dump_quasienergies) {
            Table q;
            q.metadata = {{"scan_K", format_double(r.K)}};
            q.columns = {"index", "mu"};
            for (Eigen::Index k = 0; k < r.quasienergies.size(); ++k) q.add_row({static_cast<std::int64_t>(k), r.quasienergies(k)});
            out.emit(std::move(q), "quasienergies_K" + std::to_string(i));
        }
    }
    out.emit(std::move(t), "r_vs_K");
}

void run_analyze(const RunConfig& cfg, const Output& out)
{
    const Metadata src{{"input", cfg.input.string()}};
    if (cfg.analysis == "sigma") {
        const auto F = read_complex_series(cfg.input);
        const auto sigma = sigma_series(F, cfg.coarse, cfg.params.epsilon, cfg.params.K);
        out.emit(series_table(sigma, src, "sigma"), "sigma");
        if (cfg.fit_t_min || cfg.fit_t_max) {
            const auto [lo, hi] = fit_window(cfg, sigma.times.front(), sigma.times.back());
            const auto f = fit_power_law(sigma, lo, hi);
            Table t = fit_table({{"sigma", f}});
            t.metadata = src;
            out.emit(std::move(t), "fit");
            std::printf("analyze: sigma exponent = %.4f +- %.4f\n", f.exponent, f.stderr_exponent);
        }
        return;
    }
    const auto s = read_time_series(cfg.input);
    require(s.size() > 0, "analyze: input series is empty");
    const auto [lo, hi] = fit_window(cfg, s.times.front(), s.times.back());
    const auto f = fit_power_law(s, lo, hi);
    Table t = fit_table({{"value", f}});
    t.metadata = src;
    out.emit(std::move(t), "fit");
    std::printf("analyze: exponent = %.4f +- %.4f on [%lld, %lld]\n", f.exponent, f.stderr_exponent, static_cast<long long>(lo),
                static_cast<long long>(hi));
}

} // namespace

int main(int argc, char** argv)
{
    ensure_blas_kernel(argv);
    CLI::App app{"Kicked-rotor dynamics: evolution, Lyapunov exponents, conserved-quantity drift and level statistics."};
    app.require_subcommand(1);
    app.set_version_flag("--version", ROTORDYN_VERSION);

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    bool json = false;
    for (const auto& name : known_commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "override a config key, key=value (repeatable)");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_flag("--json", json, "also write a JSON mirror of every table");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const auto cfg = config_path.empty() ? parse_config_text("", overrides, command) : parse_config_file(config_path, overrides, command);
        Output out{out_dir, json, run_metadata(cfg)};
        fs::create_directories(out.dir);
        if (command == "evolve") run_evolve(cfg, out);
        else if (command == "lyapunov") run_lyapunov(cfg, out);
        else if (command == "nekhoroshev") run_nekhoroshev(cfg, out);
        else if (command == "ed-scan") run_ed_scan(cfg, out);
        else run_analyze(cfg, out);
        return exit_ok;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    }
}
