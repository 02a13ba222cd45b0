#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mbtsad/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string attack_family;
    std::vector<std::string> seeds;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "Config file (key = value lines)");
    cmd->add_option("--out", o.out_dir, "Output directory");
    cmd->add_option("--attack", o.attack_family, "Attack family: badnets|lwp|ep");
    cmd->add_option("--seed,--seeds", o.seeds, "Seed list")->delimiter(',');
}

mbtsad::ExperimentConfig resolve(const CommonOpts& o) {
    mbtsad::ExperimentConfig cfg = mbtsad::default_config();
    if (!o.config_path.empty()) cfg = mbtsad::load_config_file(o.config_path, cfg);
    if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
    if (!o.attack_family.empty())
        mbtsad::apply_config_kv(cfg, "attack.family", o.attack_family);
    if (!o.seeds.empty()) {
        std::string joined;
        for (size_t i = 0; i < o.seeds.size(); ++i) joined += (i ? "," : "") + o.seeds[i];
        mbtsad::apply_config_kv(cfg, "run.seeds", joined);
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backdoor attack/defense laboratory for small text classifiers"};
    app.require_subcommand(1);

    CommonOpts prep_o, atk_o, def_o, ana_o, rep_o;
    std::string method = "mbtsad";

    CLI::App* prep = app.add_subcommand("prepare", "Train tokenizer and build dataset splits");
    add_common(prep, prep_o);
    CLI::App* atk = app.add_subcommand("attack", "Train the configured backdoor attack");
    add_common(atk, atk_o);
    CLI::App* def = app.add_subcommand("defend", "Run a defense against the attacked checkpoint");
    add_common(def, def_o);
    def->add_option("--method", method,
                    "mbtsad|mbtsad_no_att|mbtsad_no_hid|cd|cft|reinit|ts_ft");
    CLI::App* ana = app.add_subcommand("analyze", "Augmentation CE table and representation export");
    add_common(ana, ana_o);
    CLI::App* rep = app.add_subcommand("report", "Aggregate metric reports");
    add_common(rep, rep_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) {
            auto manifest = mbtsad::cmd_prepare(resolve(prep_o));
            std::cout << "prepared: config_hash=" << manifest["config_hash"].get<std::string>()
                      << " vocab_size=" << manifest["vocab_size"] << "\n";
        } else if (atk->parsed()) {
            auto metrics = mbtsad::cmd_attack(resolve(atk_o));
            for (const auto& m : metrics)
                std::cout << "attack seed=" << m["seed"] << " cacc=" << m["cacc"]
                          << " asr=" << m["asr"] << "\n";
        } else if (def->parsed()) {
            auto metrics = mbtsad::cmd_defend(resolve(def_o), method);
            for (const auto& m : metrics)
                std::cout << "defend " << method << " seed=" << m["seed"]
                          << " cacc=" << m["cacc"] << " asr=" << m["asr"] << "\n";
        } else if (ana->parsed()) {
            auto summaries = mbtsad::cmd_analyze(resolve(ana_o));
            for (const auto& s : summaries)
                std::cout << "analyze seed=" << s["seed"]
                          << " selected=" << s["selected_method"].get<std::string>() << "\n";
        } else if (rep->parsed()) {
            auto report = mbtsad::cmd_report(resolve(rep_o));
            std::cout << "report: " << report["aggregate"].size() << " aggregated settings\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
