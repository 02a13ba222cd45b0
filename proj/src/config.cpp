#include "mbtsad/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mbtsad {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("bad boolean value: " + v);
}

Optimizer parse_opt(const std::string& v) {
    if (v == "sgd") return Optimizer::sgd;
    if (v == "adam") return Optimizer::adam;
    throw std::invalid_argument("bad optimizer: " + v);
}

std::string opt_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

std::vector<std::string> split_commas(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

ExperimentConfig default_config() { return ExperimentConfig{}; }

void apply_config_kv(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    try {
        if (key == "data.train_path") cfg.train_path = v;
        else if (key == "data.test_path") cfg.test_path = v;
        else if (key == "data.format") {
            if (v != "tsv" && v != "jsonl") throw std::invalid_argument("format must be tsv|jsonl");
            cfg.data_format = v;
        } else if (key == "data.clean_ratio") cfg.clean_ratio = std::stod(v);
        else if (key == "tokenizer.num_merges") cfg.num_merges = std::stoi(v);
        else if (key == "model.num_layers") cfg.model.num_layers = std::stoi(v);
        else if (key == "model.num_heads") cfg.model.num_heads = std::stoi(v);
        else if (key == "model.hidden_dim") cfg.model.hidden_dim = std::stoi(v);
        else if (key == "model.max_len") cfg.model.max_len = std::stoi(v);
        else if (key == "model.ffn_dim") cfg.model.ffn_dim = std::stoi(v);
        else if (key == "model.dropout") cfg.model.dropout_rate = std::stod(v);
        else if (key == "attack.family") cfg.attack.family = attack_family_from_string(v);
        else if (key == "attack.triggers") cfg.attack.triggers = split_commas(v);
        else if (key == "attack.target_label") cfg.attack.target_label = std::stoi(v);
        else if (key == "attack.poison_rate") cfg.attack.poison_rate = std::stod(v);
        else if (key == "attack.insert_policy")
            cfg.attack.insert_policy = insert_policy_from_string(v);
        else if (key == "attack.lr") cfg.attack_lr = std::stod(v);
        else if (key == "attack.epochs") cfg.attack_epochs = std::stoi(v);
        else if (key == "attack.batch_size") cfg.attack_batch = std::stoi(v);
        else if (key == "attack.optimizer") cfg.attack_opt = parse_opt(v);
        else if (key == "attack.ep_lr") cfg.ep_lr = std::stod(v);
        else if (key == "attack.ep_steps") cfg.ep_steps = std::stoi(v);
        else if (key == "defense.alpha") cfg.defense.alpha = std::stod(v);
        else if (key == "defense.beta") cfg.defense.beta = std::stod(v);
        else if (key == "defense.retrain_lr") cfg.defense.retrain_lr = std::stod(v);
        else if (key == "defense.distill_lr") cfg.defense.distill_lr = std::stod(v);
        else if (key == "defense.retrain_epochs") cfg.defense.retrain_epochs = std::stoi(v);
        else if (key == "defense.distill_epochs") cfg.defense.distill_epochs = std::stoi(v);
        else if (key == "defense.use_attention_loss")
            cfg.defense.use_attention_loss = parse_bool(v);
        else if (key == "defense.use_hidden_loss") cfg.defense.use_hidden_loss = parse_bool(v);
        else if (key == "defense.n_augments") cfg.defense.augment_budget.n_per_sample = std::stoi(v);
        else if (key == "defense.batch_size") cfg.defense.batch_size = std::stoi(v);
        else if (key == "defense.optimizer") cfg.defense.opt = parse_opt(v);
        else if (key == "defense.student_dropout") cfg.defense.student_dropout = parse_bool(v);
        else if (key == "analyze.methods") cfg.analyze_methods = split_commas(v);
        else if (key == "analyze.batch_size") cfg.analyze_batch = std::stoi(v);
        else if (key == "run.seeds") {
            cfg.seeds.clear();
            for (const auto& s : split_commas(v)) cfg.seeds.push_back(std::stoull(s));
            if (cfg.seeds.empty()) throw std::invalid_argument("run.seeds must be non-empty");
        } else if (key == "run.out_dir") cfg.out_dir = v;
        else if (key == "run.threads") cfg.threads = std::stoi(v);
        else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument("bad value for " + key + ": '" + v + "' (" + e.what() + ")");
    }
}

ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected key = value");
        apply_config_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["data.train_path"] = cfg.train_path;
    kv["data.test_path"] = cfg.test_path;
    kv["data.format"] = cfg.data_format;
    kv["data.clean_ratio"] = fmt(cfg.clean_ratio);
    kv["tokenizer.num_merges"] = std::to_string(cfg.num_merges);
    kv["model.num_layers"] = std::to_string(cfg.model.num_layers);
    kv["model.num_heads"] = std::to_string(cfg.model.num_heads);
    kv["model.hidden_dim"] = std::to_string(cfg.model.hidden_dim);
    kv["model.max_len"] = std::to_string(cfg.model.max_len);
    kv["model.ffn_dim"] = std::to_string(cfg.model.ffn_dim);
    kv["model.dropout"] = fmt(cfg.model.dropout_rate);
    kv["attack.family"] = to_string(cfg.attack.family);
    std::string trigs;
    for (size_t i = 0; i < cfg.attack.triggers.size(); ++i)
        trigs += (i ? "," : "") + cfg.attack.triggers[i];
    kv["attack.triggers"] = trigs;
    kv["attack.target_label"] = std::to_string(cfg.attack.target_label);
    kv["attack.poison_rate"] = fmt(cfg.attack.poison_rate);
    kv["attack.insert_policy"] = to_string(cfg.attack.insert_policy);
    kv["attack.lr"] = fmt(cfg.attack_lr);
    kv["attack.epochs"] = std::to_string(cfg.attack_epochs);
    kv["attack.batch_size"] = std::to_string(cfg.attack_batch);
    kv["attack.optimizer"] = opt_name(cfg.attack_opt);
    kv["attack.ep_lr"] = fmt(cfg.ep_lr);
    kv["attack.ep_steps"] = std::to_string(cfg.ep_steps);
    kv["defense.alpha"] = fmt(cfg.defense.alpha);
    kv["defense.beta"] = fmt(cfg.defense.beta);
    kv["defense.retrain_lr"] = fmt(cfg.defense.retrain_lr);
    kv["defense.distill_lr"] = fmt(cfg.defense.distill_lr);
    kv["defense.retrain_epochs"] = std::to_string(cfg.defense.retrain_epochs);
    kv["defense.distill_epochs"] = std::to_string(cfg.defense.distill_epochs);
    kv["defense.use_attention_loss"] = cfg.defense.use_attention_loss ? "true" : "false";
    kv["defense.use_hidden_loss"] = cfg.defense.use_hidden_loss ? "true" : "false";
    kv["defense.n_augments"] = std::to_string(cfg.defense.augment_budget.n_per_sample);
    kv["defense.batch_size"] = std::to_string(cfg.defense.batch_size);
    kv["defense.optimizer"] = opt_name(cfg.defense.opt);
    kv["defense.student_dropout"] = cfg.defense.student_dropout ? "true" : "false";
    std::string methods;
    for (size_t i = 0; i < cfg.analyze_methods.size(); ++i)
        methods += (i ? "," : "") + cfg.analyze_methods[i];
    kv["analyze.methods"] = methods;
    kv["analyze.batch_size"] = std::to_string(cfg.analyze_batch);
    std::string seeds;
    for (size_t i = 0; i < cfg.seeds.size(); ++i)
        seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
    kv["run.seeds"] = seeds;
    kv["run.out_dir"] = cfg.out_dir;
    kv["run.threads"] = std::to_string(cfg.threads);

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
    return hex64(fnv1a64(serialize_config(cfg)));
}

std::string config_hash_sections(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& section_prefixes) {
    std::istringstream in(serialize_config(cfg));
    std::string line, kept;
    while (std::getline(in, line)) {
        for (const auto& p : section_prefixes) {
            if (line.rfind(p, 0) == 0) {
                kept += line + "\n";
                break;
            }
        }
    }
    return hex64(fnv1a64(kept));
}

}  // namespace mbtsad
