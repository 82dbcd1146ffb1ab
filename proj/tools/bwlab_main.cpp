// bwlab command-line front end. Links the C API only.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bwlab.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Cli {
    std::string family = "hbar";
    double hbar = 1.0;
    std::string beta = "0";
    std::string alpha = "0";
    double k = 1.0;
    double delta = 1.0;
    double tol = 1e-12;
    std::string out_dir = ".";
    uint64_t seed = 0;
};

// "RE" or "RE,IM"
std::pair<double, double> parse_pair(const std::string& s, const char* what) {
    try {
        size_t comma = s.find(',');
        if (comma == std::string::npos) return {std::stod(s), 0.0};
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        std::cerr << "error: could not parse " << what << " \"" << s << "\" (use RE or RE,IM)\n";
        std::exit(3);
    }
}

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { bwlab_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

int status_to_exit(bwlab_status st) {
    if (st == BWLAB_OK) return 0;
    if (st == BWLAB_ERR_CONFIG) return 3;
    return 2;
}

[[noreturn]] void die(bwlab_status st, const std::string& where) {
    std::cerr << "error (" << where << "): " << bwlab_last_error() << "\n";
    std::exit(status_to_exit(st));
}

bwlab_model* make_model(const Cli& cli) {
    bwlab_model* m = nullptr;
    bwlab_status st;
    if (cli.family == "hbar")
        st = bwlab_model_create_hbar(cli.hbar, &m);
    else if (cli.family == "beta") {
        auto [re, im] = parse_pair(cli.beta, "--beta");
        st = bwlab_model_create_beta(re, im, &m);
    } else if (cli.family == "alpha") {
        auto [re, im] = parse_pair(cli.alpha, "--alpha");
        st = bwlab_model_create_alpha(re, im, &m);
    } else if (cli.family == "kdelta")
        st = bwlab_model_create_kdelta(cli.k, cli.delta, &m);
    else if (cli.family == "real")
        st = bwlab_model_create_real_cubic(&m);
    else {
        std::cerr << "error: unknown family \"" << cli.family << "\"\n";
        std::exit(3);
    }
    if (st != BWLAB_OK) die(st, "model");
    return m;
}

json run_config(const Cli& cli, const std::string& command, const json& args) {
    bwlab_model* m = make_model(cli);
    OwnedString mj;
    bwlab_model_to_json(m, &mj.p);
    bwlab_model_destroy(m);
    json j;
    j["command"] = command;
    j["model"] = json::parse(mj.str());
    j["tol"] = cli.tol;
    j["seed"] = cli.seed;
    j["args"] = args;
    return j;
}

void write_json_file(const fs::path& path, const json& config, const json& result) {
    json wrapped;
    wrapped["artifact_version"] = bwlab_version();
    wrapped["run_config"] = config;
    wrapped["result"] = result;
    std::ofstream f(path);
    f << wrapped.dump(2) << "\n";
}

void write_csv_file(const fs::path& path, const json& config, const std::string& csv) {
    std::ofstream f(path);
    f << "# bwlab " << bwlab_version() << "\n";
    f << "# config: " << config.dump() << "\n";
    f << csv;
}

void write_text_file(const fs::path& path, const json& config, const std::string& text) {
    std::ofstream f(path);
    f << text;
    f << "\n<!-- bwlab " << bwlab_version() << " config " << config.dump() << " -->\n";
}

bwlab_options options_of(const Cli& cli) {
    bwlab_options o;
    bwlab_options_default(&o);
    o.tol = cli.tol;
    o.seed = cli.seed;
    return o;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bwlab: spectra, Stokes geometry and eigenvalue crossings of the "
                 "PT-symmetric cubic oscillator family"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("--family", cli.family, "hbar|beta|alpha|kdelta|real");
    app.add_option("--hbar", cli.hbar, "hbar for the hbar/real families");
    app.add_option("--beta", cli.beta, "beta as RE[,IM]");
    app.add_option("--alpha", cli.alpha, "alpha as RE[,IM]");
    app.add_option("--k", cli.k, "k for the kdelta family");
    app.add_option("--delta", cli.delta, "delta for the kdelta family");
    app.add_option("--tol", cli.tol, "integrator relative tolerance");
    app.add_option("--out", cli.out_dir, "output directory");
    app.add_option("--seed", cli.seed, "seed for deterministic jitter");

    // spectrum
    auto* sp = app.add_subcommand("spectrum", "scan eigenvalues in an energy window");
    std::string window = "0,30";
    double window_im = 1.0;
    int max_levels = 64;
    sp->add_option("--window", window, "real-part window LO,HI");
    sp->add_option("--window-im", window_im, "half-height of the window in Im E");
    sp->add_option("--max-levels", max_levels, "cap on reported levels");

    // branchpoint
    auto* bp = app.add_subcommand("branchpoint", "locate the n-th eigenvalue crossing");
    int bp_n = 0;
    bool bp_monodromy = false;
    double bp_radius = 0.1;
    bp->add_option("--n", bp_n, "crossing index");
    bp->add_flag("--monodromy", bp_monodromy, "also run the loop around hbar_n");
    bp->add_option("--radius", bp_radius, "loop radius relative to hbar_n");

    // stokes
    auto* st = app.add_subcommand("stokes", "Stokes diagrams and the critical energy");
    bool e_critical = false;
    std::string stokes_E = "0.5";
    bool stokes_diagram = false;
    std::string escape_E;
    st->add_flag("--E-critical", e_critical, "bisect the instability energy of rho(E)");
    st->add_option("--E", stokes_E, "energy RE[,IM] for a diagram");
    st->add_flag("--diagram", stokes_diagram, "trace and export the diagram at --E");
    st->add_option("--escape-fit", escape_E, "fit the escape-line asymptote at RE[,IM]");

    // zeros
    auto* zr = app.add_subcommand("zeros", "locate and classify eigenfunction zeros");
    int zr_m = 0;
    zr->add_option("--m", zr_m, "level label (node count)");

    // wkb
    auto* wk = app.add_subcommand("wkb", "semiclassical quantization");
    int wk_label = 0;
    std::string wk_scheme = "cc1";
    bool wk_compare = false;
    wk->add_option("--label", wk_label, "quantum number");
    wk->add_option("--scheme", wk_scheme, "cc1|cc3");
    wk->add_flag("--compare-exact", wk_compare, "also solve the exact level and report the gap");

    // report
    auto* rp = app.add_subcommand("report", "crossing table with trend diagnostics");
    int rp_nmax = 2;
    rp->add_option("--n-max", rp_nmax, "largest crossing index (<= 5)");

    CLI11_PARSE(app, argc, argv);

    fs::create_directories(cli.out_dir);
    fs::path out(cli.out_dir);
    bwlab_options opts = options_of(cli);

    if (sp->parsed()) {
        auto [win_lo, win_hi] = parse_pair(window, "--window");
        json args = {{"window", {win_lo, win_hi}}, {"window_im", window_im}, {"max_levels", max_levels}};
        json config = run_config(cli, "spectrum", args);
        bwlab_model* m = make_model(cli);
        opts.attach_labels = 0;
        OwnedString js;
        bwlab_status rc = bwlab_spectrum_scan(m, win_lo, -window_im, win_hi, window_im,
                                              max_levels, &opts, &js.p);
        bwlab_model_destroy(m);
        if (rc != BWLAB_OK) die(rc, "spectrum");
        json levels = json::parse(js.str());
        write_json_file(out / "spectrum.json", config, levels);
        std::ostringstream csv;
        csv << "re_E,im_E,branch,residual_w\n";
        csv.precision(17);
        for (auto& l : levels)
            csv << l["re_E"].get<double>() << "," << l["im_E"].get<double>() << ","
                << l["branch"].get<std::string>() << "," << l["residual_w"].get<double>() << "\n";
        write_csv_file(out / "spectrum.csv", config, csv.str());
        std::cout << "levels found: " << levels.size() << "\n";
        for (auto& l : levels)
            std::cout << "  E = " << l["re_E"].get<double>() << " + " << l["im_E"].get<double>()
                      << "i\n";
        return 0;
    }

    if (bp->parsed()) {
        json args = {{"n", bp_n}, {"monodromy", bp_monodromy}, {"radius", bp_radius}};
        json config = run_config(cli, "branchpoint", args);
        OwnedString js;
        bwlab_status rc = bwlab_branch_point(bp_n, &opts, &js.p);
        if (rc != BWLAB_OK) die(rc, "branchpoint");
        json result = json::parse(js.str());
        if (bp_monodromy) {
            OwnedString mj;
            rc = bwlab_monodromy(bp_n, bp_radius, &opts, &mj.p);
            if (rc != BWLAB_OK) die(rc, "monodromy");
            result["monodromy"] = json::parse(mj.str());
        }
        std::ostringstream name;
        name << "branchpoint_n" << bp_n << ".json";
        write_json_file(out / name.str(), config, result);
        std::cout << "n = " << bp_n << ": hbar_n = " << result["hbar_n"].get<double>()
                  << ", E_c = " << result["E_c"].get<double>() << ", pair = ("
                  << result["pair"][0].get<int>() << "," << result["pair"][1].get<int>()
                  << "), sqrt exponent = " << result["sqrt_fit"]["exponent"].get<double>() << "\n";
        if (bp_monodromy) {
            bool tr = result["monodromy"]["is_transposition"].get<bool>();
            std::cout << "monodromy: " << (tr ? "transposition" : "identity") << " ("
                      << result["pair"][0].get<int>() << " " << result["pair"][1].get<int>()
                      << ")\n";
        }
        return 0;
    }

    if (st->parsed()) {
        bwlab_model* m = make_model(cli);
        if (e_critical) {
            json config = run_config(cli, "stokes", {{"E_critical", true}});
            double v, lo, hi;
            bwlab_status rc = bwlab_critical_energy(m, &v, &lo, &hi);
            if (rc != BWLAB_OK) {
                bwlab_model_destroy(m);
                die(rc, "critical energy");
            }
            write_json_file(out / "critical_energy.json", config,
                            {{"E_critical", v}, {"bracket", {lo, hi}}});
            std::cout.precision(6);
            std::cout << "E^c = " << v << "  (bracket [" << lo << ", " << hi << "])\n";
        }
        if (!escape_E.empty()) {
            auto [re, im] = parse_pair(escape_E, "--escape-fit");
            json config = run_config(cli, "stokes", {{"escape_fit", {re, im}}});
            double cfit, res;
            bwlab_status rc = bwlab_escape_asymptote(m, re, im, &cfit, &res);
            if (rc != BWLAB_OK) {
                bwlab_model_destroy(m);
                die(rc, "escape fit");
            }
            write_json_file(out / "escape_fit.json", config,
                            {{"fitted_c", cfit}, {"residual", res}});
            std::cout << "escape-line asymptote constant: " << cfit << " (residual " << res
                      << ")\n";
        }
        if (stokes_diagram) {
            auto [re, im] = parse_pair(stokes_E, "--E");
            json config = run_config(cli, "stokes", {{"E", {re, im}}});
            OwnedString js, cs;
            bwlab_status rc = bwlab_stokes_diagram(m, re, im, &js.p, &cs.p);
            if (rc != BWLAB_OK) {
                bwlab_model_destroy(m);
                die(rc, "stokes diagram");
            }
            write_json_file(out / "stokes_topology.json", config, json::parse(js.str()));
            write_csv_file(out / "stokes_lines.csv", config, cs.str());
            std::cout << "diagram written; topology: "
                      << json::parse(js.str())["topology"].get<std::string>() << "\n";
        }
        bwlab_model_destroy(m);
        if (!e_critical && !stokes_diagram && escape_E.empty()) {
            std::cerr << "stokes: nothing to do (use --E-critical, --diagram or --escape-fit)\n";
            return 3;
        }
        return 0;
    }

    if (zr->parsed()) {
        json args = {{"m", zr_m}};
        json config = run_config(cli, "zeros", args);
        bwlab_model* m = make_model(cli);
        // seed the level from the semiclassical quantization, then polish
        double reE, imE;
        bwlab_status rc = bwlab_wkb_level(m, zr_m, cli.hbar, 1, &reE, &imE);
        if (rc != BWLAB_OK) {
            bwlab_model_destroy(m);
            die(rc, "wkb seed");
        }
        OwnedString pj;
        rc = bwlab_solve_eigenvalue(m, reE, imE, &opts, &pj.p);
        if (rc != BWLAB_OK) {
            bwlab_model_destroy(m);
            die(rc, "solve");
        }
        json pair = json::parse(pj.str());
        OwnedString js, cs;
        rc = bwlab_node_zero_set(m, pair["re_E"].get<double>(), pair["im_E"].get<double>(), &opts,
                                 &js.p, &cs.p);
        bwlab_model_destroy(m);
        if (rc != BWLAB_OK) die(rc, "zeros");
        json result = json::parse(js.str());
        result["eigenpair"] = pair;
        write_json_file(out / "zeros.json", config, result);
        write_csv_file(out / "zeros.csv", config, cs.str());
        // scatter-plot data: same rows, space separated for plotting tools
        std::ostringstream scatter;
        scatter << "# re im class\n";
        for (auto& z : result["zeros"])
            scatter << z["re"].get<double>() << " " << z["im"].get<double>() << " "
                    << z["class"].get<std::string>() << "\n";
        write_csv_file(out / "zeros_scatter.dat", config, scatter.str());
        std::cout << "m = " << pair["label"].get<int>() << ": " << result["nodes"].get<size_t>()
                  << " nodes, " << result["nodes_imag"].get<int>() << " imaginary\n";
        return 0;
    }

    if (wk->parsed()) {
        json args = {{"label", wk_label}, {"scheme", wk_scheme}, {"compare_exact", wk_compare}};
        json config = run_config(cli, "wkb", args);
        bwlab_model* m = make_model(cli);
        int scheme = wk_scheme == "cc3" ? 1 : 0;
        double reE, imE;
        bwlab_status rc = bwlab_wkb_level(m, wk_label, cli.hbar, scheme, &reE, &imE);
        if (rc != BWLAB_OK) {
            bwlab_model_destroy(m);
            die(rc, "wkb");
        }
        json result = {{"re_E", reE}, {"im_E", imE}, {"scheme", wk_scheme}, {"label", wk_label}};
        if (wk_compare) {
            OwnedString pj;
            opts.attach_labels = 0;
            rc = bwlab_solve_eigenvalue(m, reE, imE, &opts, &pj.p);
            if (rc != BWLAB_OK) {
                bwlab_model_destroy(m);
                die(rc, "solve");
            }
            json pair = json::parse(pj.str());
            result["exact_re_E"] = pair["re_E"];
            result["exact_im_E"] = pair["im_E"];
            double dx = pair["re_E"].get<double>() - reE;
            double dy = pair["im_E"].get<double>() - imE;
            result["wkb_gap"] = std::sqrt(dx * dx + dy * dy);
        }
        bwlab_model_destroy(m);
        write_json_file(out / "wkb.json", config, result);
        std::cout << "E_wkb(" << wk_label << ") = " << reE << " + " << imE << "i";
        if (wk_compare) std::cout << "  gap to exact: " << result["wkb_gap"].get<double>();
        std::cout << "\n";
        return 0;
    }

    if (rp->parsed()) {
        json args = {{"n_max", rp_nmax}};
        json config = run_config(cli, "report", args);
        OwnedString js, md;
        bwlab_status rc = bwlab_crossing_report(rp_nmax, &opts, &js.p, &md.p);
        if (rc != BWLAB_OK) die(rc, "report");
        write_json_file(out / "crossing_report.json", config, json::parse(js.str()));
        write_text_file(out / "crossing_report.md", config, md.str());
        std::cout << md.str();
        return 0;
    }

    return 3;
}
