#include "tamperscan/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tamperscan/errors.hpp"
#include "tamperscan/selftest.hpp"

namespace tamperscan {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

void setup_logging() {
    auto logger = spdlog::get("tamperscan");
    if (!logger) logger = spdlog::stderr_color_mt("tamperscan");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("TAMPERSCAN_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
}

struct Flags {
    std::string script;
    std::string base;
    std::string out;
    std::uint64_t seed = 0;
    long long delay_ms = 0;
    int occurrence_limit = 3;
    std::string accept_regex;
    bool violate = false;
    int budget = 8;
    bool text = false;
    std::string scenario;
    int port = 8080;
    bool sequential = false;
    std::string report_dir;
};

ScanOptions options_of(const Flags& f) {
    ScanOptions o;
    o.capture.occurrence_limit = f.occurrence_limit;
    if (!f.accept_regex.empty()) o.capture.accept_regex = f.accept_regex;
    o.fuzz.seed = f.seed;
    o.fuzz.budget = f.budget;
    o.fuzz.violate_restrictions = f.violate;
    o.delay = std::chrono::milliseconds(f.delay_ms);
    return o;
}

void add_tuning(CLI::App* cmd, Flags& f) {
    cmd->add_option("--delay-ms", f.delay_ms, "Delay before each request")->check(CLI::NonNegativeNumber);
    cmd->add_option("--occurrence-limit", f.occurrence_limit, "Max occurrences of a reflected value")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--accept-regex", f.accept_regex, "Acceptance regex for steps without key features");
    cmd->add_option("--base", f.base, "Override the script's base URL");
}

int do_capture(const Flags& f) {
    auto script = with_base(ActionScript::parse(read_file(f.script)), f.base);
    auto options = options_of(f);
    Session session(SessionOptions{options.delay});
    auto result = capture(script, session, options.capture);
    nlohmann::ordered_json doc{{"schema_version", kReportSchemaVersion},
                               {"target", script.base_url},
                               {"scenario", script.scenario},
                               {"capture", to_json(CaptureSummary::of(result))}};
    std::string text = doc.dump(2) + "\n";
    if (f.out.empty()) {
        std::cout << text;
    } else {
        write_file(f.out, text);
    }
    return kExitClean;
}

int do_scan(const Flags& f) {
    auto script = with_base(ActionScript::parse(read_file(f.script)), f.base);
    auto report = run_scan(script, options_of(f));
    if (!f.out.empty()) write_file(f.out, emit_json(report));
    if (f.text || f.out.empty()) {
        std::optional<GroundTruth> truth;
        try {
            truth = ground_truth(scenario_from_string(report.scenario));
        } catch (const ConfigError&) {
        }
        std::cout << emit_text(report, truth);
    }
    return report.findings.empty() ? kExitClean : kExitFindings;
}

int do_testbed(const Flags& f) {
    Testbed bed(TestbedConfig{scenario_from_string(f.scenario), "127.0.0.1", f.port});
    bed.start();
    std::cout << to_string(bed.scenario()) << " listening on " << bed.base_url() << std::endl;
    bed.wait();
    return kExitClean;
}

int do_selftest(const Flags& f) {
    auto result = selftest(options_of(f), !f.sequential);
    if (!f.report_dir.empty()) {
        std::filesystem::create_directories(f.report_dir);
        for (const auto& run : result.runs) {
            if (run.error) continue;
            write_file((std::filesystem::path(f.report_dir) / (std::string(to_string(run.scenario)) + ".json")).string(),
                       emit_json(run.report));
        }
    }
    std::cout << selftest_summary(result);
    return result.passed() ? kExitClean : kExitError;
}

}  // namespace

int run_cli(int argc, char** argv) {
    if (!spdlog::get("tamperscan")) setup_logging();

    CLI::App app{"Workflow-aware parameter tampering scanner"};
    app.require_subcommand(1);
    Flags f;

    auto* cap = app.add_subcommand("capture", "Record two valid runs and print tokens, dependencies and features");
    cap->add_option("--script", f.script, "Action script (JSON)")->required()->check(CLI::ExistingFile);
    cap->add_option("--dump", f.out, "Write the analysis JSON here instead of stdout");
    add_tuning(cap, f);

    auto* sc = app.add_subcommand("scan", "Capture, then fuzz every step");
    sc->add_option("--script", f.script, "Action script (JSON)")->required()->check(CLI::ExistingFile);
    sc->add_option("--report", f.out, "Write the JSON report here");
    sc->add_flag("--text", f.text, "Also print the text summary");
    sc->add_option("--seed", f.seed, "Mutation seed");
    sc->add_option("--budget", f.budget, "Forced attempts per parameter")->check(CLI::PositiveNumber);
    sc->add_flag("--violate-restrictions", f.violate, "Also emit required/maxlength violations");
    add_tuning(sc, f);

    auto* tb = app.add_subcommand("testbed", "Serve a reference application");
    tb->add_option("--scenario", f.scenario, "hsbc-like, bea-like, boc-like or ajax-date")->required();
    tb->add_option("--port", f.port, "Port (0 for ephemeral)")->check(CLI::Range(0, 65535));

    auto* st = app.add_subcommand("selftest", "Scan every bundled scenario against its own test bed");
    st->add_option("--seed", f.seed, "Mutation seed");
    st->add_option("--budget", f.budget, "Forced attempts per parameter")->check(CLI::PositiveNumber);
    st->add_option("--delay-ms", f.delay_ms, "Delay before each request")->check(CLI::NonNegativeNumber);
    st->add_option("--report-dir", f.report_dir, "Write one JSON report per scenario here");
    st->add_flag("--sequential", f.sequential, "Run scenarios one after another");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*cap) return do_capture(f);
        if (*sc) return do_scan(f);
        if (*tb) return do_testbed(f);
        if (*st) return do_selftest(f);
    } catch (const Error& e) {
        std::cerr << "tamperscan: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "tamperscan: unexpected error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}

}  // namespace tamperscan
