#include "mbtsad/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mbtsad/checkpoint.hpp"
#include "mbtsad/eval.hpp"

namespace fs = std::filesystem;

namespace mbtsad {

namespace {

const std::vector<std::string> kPrepareSections = {"data.", "tokenizer.", "model."};
const std::vector<std::string> kAttackSections = {"data.", "tokenizer.", "model.", "attack."};

void set_threads(const ExperimentConfig& cfg) {
#ifdef _OPENMP
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing artifact: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

DatasetFormat format_of(const ExperimentConfig& cfg) {
    return cfg.data_format == "jsonl" ? DatasetFormat::jsonl : DatasetFormat::tsv;
}

struct Prepared {
    SubwordVocab vocab;
    LabeledDataset full_train;
    LabeledDataset clean_test;
    ModelConfig model_cfg;
    nlohmann::json manifest;
};

std::string subset_path(const ExperimentConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/data/clean_subset_s" + std::to_string(seed) + ".jsonl";
}

Prepared load_prepared(const ExperimentConfig& cfg) {
    Prepared pr;
    pr.manifest = read_json(cfg.out_dir + "/manifest.json");
    const std::string want = config_hash_sections(cfg, kPrepareSections);
    if (pr.manifest.at("prepare_hash").get<std::string>() != want)
        throw std::runtime_error(
            "prepared artifacts were built with a different data/tokenizer/model config; "
            "rerun prepare");
    pr.vocab = load_vocab(cfg.out_dir + "/vocab.merges.txt", cfg.out_dir + "/vocab.tokens.tsv");
    pr.full_train = load_dataset(cfg.out_dir + "/data/full_train.jsonl", DatasetFormat::jsonl);
    pr.full_train.role = DatasetRole::full_train;
    pr.clean_test = load_dataset(cfg.out_dir + "/data/clean_test.jsonl", DatasetFormat::jsonl);
    pr.clean_test.role = DatasetRole::clean_test;
    pr.model_cfg = cfg.model;
    pr.model_cfg.vocab_size = pr.vocab.size();
    pr.model_cfg.num_classes = pr.full_train.num_classes;
    pr.model_cfg.validate();
    return pr;
}

LabeledDataset load_subset(const ExperimentConfig& cfg, uint64_t seed, int num_classes) {
    LabeledDataset d = load_dataset(subset_path(cfg, seed), DatasetFormat::jsonl);
    d.role = DatasetRole::clean_subset;
    d.num_classes = num_classes;
    return d;
}

std::string attack_dir(const ExperimentConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/attack/" + to_string(cfg.attack.family) + "/seed" +
           std::to_string(seed);
}

TrainHParams attack_hparams(const ExperimentConfig& cfg) {
    TrainHParams hp;
    hp.lr = cfg.attack_lr;
    hp.epochs = cfg.attack_epochs;
    hp.batch_size = cfg.attack_batch;
    hp.opt = cfg.attack_opt;
    return hp;
}

// The clean twin shares the init seed with the attack models so CACC
// comparisons isolate the poisoning.
ModelParams train_clean_twin(const Prepared& pr, const ExperimentConfig& cfg, uint64_t seed) {
    ModelParams p = init_params(pr.model_cfg, mix_seed(seed, "clean_init"));
    return train_supervised(p, pr.full_train, pr.vocab, attack_hparams(cfg),
                            mix_seed(seed, "clean_train"));
}

AugmentationMethod method_from_name(const std::string& name) {
    AugmentationMethod m;
    m.kind = augment_kind_from_string(name);
    return m;
}

double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

nlohmann::json cmd_prepare(const ExperimentConfig& cfg) {
    set_threads(cfg);
    if (!(cfg.clean_ratio > 0.0 && cfg.clean_ratio <= 1.0))
        throw std::invalid_argument("data.clean_ratio must be in (0, 1]");
    if (cfg.num_merges < 0) throw std::invalid_argument("tokenizer.num_merges must be >= 0");
    cfg.attack.validate();
    if (!fs::exists(cfg.train_path))
        throw std::runtime_error("missing input: " + cfg.train_path);
    if (!fs::exists(cfg.test_path)) throw std::runtime_error("missing input: " + cfg.test_path);

    fs::create_directories(cfg.out_dir + "/data");

    LabeledDataset train = load_dataset(cfg.train_path, format_of(cfg));
    train.role = DatasetRole::full_train;
    LabeledDataset test = load_dataset(cfg.test_path, format_of(cfg));
    test.role = DatasetRole::clean_test;
    test.num_classes = std::max(test.num_classes, train.num_classes);
    train.num_classes = test.num_classes;
    train.validate();
    test.validate();

    SubwordVocab vocab = train_bpe(train, cfg.num_merges);
    save_vocab(vocab, cfg.out_dir + "/vocab.merges.txt", cfg.out_dir + "/vocab.tokens.tsv");

    save_jsonl(train, cfg.out_dir + "/data/full_train.jsonl");
    save_jsonl(test, cfg.out_dir + "/data/clean_test.jsonl");
    for (uint64_t seed : cfg.seeds) {
        LabeledDataset subset = split_clean_subset(train, cfg.clean_ratio, seed);
        save_jsonl(subset, subset_path(cfg, seed));
    }

    DatasetStats st = dataset_stats(train);
    nlohmann::json stats = {{"n_train", train.size()},
                            {"n_test", test.size()},
                            {"num_classes", train.num_classes},
                            {"mean_token_count", st.mean_token_count},
                            {"per_class_counts", st.per_class_counts}};
    write_json(cfg.out_dir + "/data/dataset_stats.json", stats);

    nlohmann::json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["prepare_hash"] = config_hash_sections(cfg, kPrepareSections);
    manifest["vocab_hash"] = hex64(vocab.content_hash());
    manifest["vocab_size"] = vocab.size();
    manifest["num_classes"] = train.num_classes;
    nlohmann::json seeds = nlohmann::json::array();
    for (uint64_t s : cfg.seeds) seeds.push_back(s);
    manifest["seeds"] = seeds;
    write_json(cfg.out_dir + "/manifest.json", manifest);
    write_text(cfg.out_dir + "/config.txt", serialize_config(cfg));
    return manifest;
}

nlohmann::json cmd_attack(const ExperimentConfig& cfg) {
    set_threads(cfg);
    cfg.attack.validate();
    Prepared pr = load_prepared(cfg);

    nlohmann::json out = nlohmann::json::array();
    for (uint64_t seed : cfg.seeds) {
        const std::string dir = attack_dir(cfg, seed);
        fs::create_directories(dir);

        PoisonBuild pb =
            build_poisoned_dataset(pr.full_train, cfg.attack, mix_seed(seed, "poison_build"));
        LabeledDataset poison_test = pb.build_poison_test(pr.clean_test);
        save_jsonl(pb.poison_train, dir + "/poison_train.jsonl");
        save_jsonl(poison_test, dir + "/poison_test.jsonl");

        ModelParams model;
        SubwordVocab vocab = pr.vocab;
        switch (cfg.attack.family) {
            case AttackFamily::badnets:
                model = train_badnets(pr.full_train, cfg.attack, pr.model_cfg, pr.vocab,
                                      attack_hparams(cfg), seed);
                break;
            case AttackFamily::lwp:
                model = train_lwp(pr.full_train, cfg.attack, pr.model_cfg, pr.vocab,
                                  attack_hparams(cfg), seed);
                break;
            case AttackFamily::ep: {
                ModelParams clean = train_clean_twin(pr, cfg, seed);
                save_checkpoint(clean, dir + "/clean_model.bin",
                                {{"seed", seed}, {"role", "clean_twin"}},
                                pr.vocab.content_hash());
                LabeledDataset probe;
                probe.num_classes = pr.full_train.num_classes;
                probe.role = DatasetRole::full_train;
                const size_t probe_n = std::min<size_t>(400, pr.full_train.size());
                probe.samples.assign(pr.full_train.samples.begin(),
                                     pr.full_train.samples.begin() + probe_n);
                EpResult ep = run_ep(clean, pr.vocab, cfg.attack, probe, cfg.ep_lr, cfg.ep_steps,
                                     cfg.attack_batch, mix_seed(seed, "ep"));
                model = std::move(ep.params);
                vocab = std::move(ep.vocab);
                if (ep.vocab_extended)
                    save_vocab(vocab, dir + "/vocab.merges.txt", dir + "/vocab.tokens.tsv");
                break;
            }
        }

        nlohmann::json manifest = {{"seed", seed},
                                   {"attack", cfg.attack.summary()},
                                   {"lr", cfg.attack_lr},
                                   {"epochs", cfg.attack_epochs},
                                   {"config_hash", config_hash_sections(cfg, kAttackSections)}};
        save_checkpoint(model, dir + "/checkpoint.bin", manifest, vocab.content_hash());

        MetricsReport rep;
        rep.cacc = compute_cacc(model, vocab, pr.clean_test);
        rep.asr = compute_asr(model, vocab, poison_test, cfg.attack.target_label);
        rep.n_clean = static_cast<int>(pr.clean_test.size());
        rep.n_poison = static_cast<int>(poison_test.size());
        rep.model_id = file_hash(dir + "/checkpoint.bin");
        rep.attack_summary = cfg.attack.summary();
        rep.defense_tag = "none";
        rep.config_hash = config_hash(cfg);
        rep.seed = seed;
        write_json(dir + "/metrics.json", metrics_to_json(rep));
        out.push_back(metrics_to_json(rep));
    }
    return out;
}

nlohmann::json cmd_defend(const ExperimentConfig& cfg, const std::string& method) {
    set_threads(cfg);
    Prepared pr = load_prepared(cfg);

    nlohmann::json out = nlohmann::json::array();
    for (uint64_t seed : cfg.seeds) {
        const std::string adir = attack_dir(cfg, seed);
        Checkpoint ck = load_checkpoint(adir + "/checkpoint.bin");
        if (ck.manifest.value("config_hash", "") != config_hash_sections(cfg, kAttackSections))
            throw std::runtime_error("attack checkpoint built with a different config; rerun attack");
        SubwordVocab vocab = fs::exists(adir + "/vocab.tokens.tsv")
                                 ? load_vocab(adir + "/vocab.merges.txt",
                                              adir + "/vocab.tokens.tsv")
                                 : pr.vocab;
        if (ck.vocab_hash != vocab.content_hash())
            throw std::runtime_error("checkpoint/vocab hash mismatch for seed " +
                                     std::to_string(seed));

        LabeledDataset d_c = load_subset(cfg, seed, pr.full_train.num_classes);
        LabeledDataset poison_test =
            load_dataset(adir + "/poison_test.jsonl", DatasetFormat::jsonl);
        poison_test.role = DatasetRole::poison_test;

        DistillConfig dc = cfg.defense;
        std::vector<DistillEpochLog> epochs;
        bool log_att = dc.use_attention_loss, log_hid = dc.use_hidden_loss;
        ModelParams defended;
        if (method == "mbtsad" || method == "mbtsad_no_att" || method == "mbtsad_no_hid" ||
            method == "cd") {
            if (method == "mbtsad_no_att") dc.use_attention_loss = false;
            if (method == "mbtsad_no_hid") dc.use_hidden_loss = false;
            if (method == "cd") {
                dc.use_attention_loss = false;
                dc.use_hidden_loss = false;
                dc.alpha = 1.0;
            }
            log_att = dc.use_attention_loss;
            log_hid = dc.use_hidden_loss;
            MbtsadResult res = run_mbtsad(ck.params, d_c, vocab, dc, seed);
            defended = std::move(res.m_c);
            epochs = std::move(res.distill_epochs);
        } else if (method == "cft") {
            defended = run_baseline(BaselineMethod::cft, ck.params, d_c, vocab, dc, seed);
        } else if (method == "reinit") {
            defended =
                run_baseline(BaselineMethod::reinit_last_layer, ck.params, d_c, vocab, dc, seed);
        } else if (method == "ts_ft") {
            defended = run_baseline(BaselineMethod::ts_ft, ck.params, d_c, vocab, dc, seed);
        } else {
            throw std::invalid_argument("unknown defense method: " + method);
        }

        const std::string dir = cfg.out_dir + "/defend/" + method + "/seed" +
                                std::to_string(seed);
        fs::create_directories(dir);

        nlohmann::json manifest = {{"seed", seed},
                                   {"method", method},
                                   {"attack", cfg.attack.summary()},
                                   {"alpha", dc.alpha},
                                   {"beta", dc.beta},
                                   {"retrain_lr", dc.retrain_lr},
                                   {"distill_lr", dc.distill_lr},
                                   {"config_hash", config_hash(cfg)}};
        save_checkpoint(defended, dir + "/checkpoint.bin", manifest, vocab.content_hash());

        nlohmann::json report;
        report["method"] = method;
        report["seed"] = seed;
        nlohmann::json ep_rows = nlohmann::json::array();
        for (const auto& e : epochs) {
            nlohmann::json row;
            if (log_att) row["attention"] = e.attention;
            if (log_hid) row["hidden"] = e.hidden;
            row["classification"] = e.classification;
            row["total"] = e.total;
            ep_rows.push_back(row);
        }
        report["epochs"] = ep_rows;
        write_json(dir + "/defense_report.json", report);

        MetricsReport rep;
        rep.cacc = compute_cacc(defended, vocab, pr.clean_test);
        rep.asr = compute_asr(defended, vocab, poison_test, cfg.attack.target_label);
        rep.n_clean = static_cast<int>(pr.clean_test.size());
        rep.n_poison = static_cast<int>(poison_test.size());
        rep.model_id = file_hash(dir + "/checkpoint.bin");
        rep.attack_summary = cfg.attack.summary();
        rep.defense_tag = method;
        rep.config_hash = config_hash(cfg);
        rep.seed = seed;
        write_json(dir + "/metrics.json", metrics_to_json(rep));
        out.push_back(metrics_to_json(rep));
    }
    return out;
}

nlohmann::json cmd_analyze(const ExperimentConfig& cfg) {
    set_threads(cfg);
    Prepared pr = load_prepared(cfg);

    nlohmann::json out = nlohmann::json::array();
    for (uint64_t seed : cfg.seeds) {
        const std::string adir = attack_dir(cfg, seed);
        Checkpoint ck = load_checkpoint(adir + "/checkpoint.bin");
        SubwordVocab vocab = fs::exists(adir + "/vocab.tokens.tsv")
                                 ? load_vocab(adir + "/vocab.merges.txt",
                                              adir + "/vocab.tokens.tsv")
                                 : pr.vocab;

        LabeledDataset poison_train =
            load_dataset(adir + "/poison_train.jsonl", DatasetFormat::jsonl);
        LabeledDataset clean_sources, poisoned;
        clean_sources.num_classes = poisoned.num_classes = poison_train.num_classes;
        clean_sources.role = DatasetRole::full_train;
        poisoned.role = DatasetRole::poison_train;
        for (const auto& s : poison_train.samples)
            (s.poisoned ? poisoned : clean_sources).samples.push_back(s);

        const std::string dir = cfg.out_dir + "/analyze/seed" + std::to_string(seed);
        fs::create_directories(dir);

        // Cross-entropy table over the configured methods plus the identity
        // control, on the clean-source samples of the poisoned train set.
        std::vector<AugmentationMethod> methods;
        methods.push_back(method_from_name("identity"));
        for (const auto& name : cfg.analyze_methods) methods.push_back(method_from_name(name));
        auto ce_rows = batch_ce_analysis(ck.params, vocab, clean_sources, methods,
                                         cfg.analyze_batch, mix_seed(seed, "analyze_ce"));
        write_ce_table_csv(ce_rows, dir + "/ce_table.csv");

        // Augmentation selection over the non-identity candidates on d_c.
        LabeledDataset d_c = load_subset(cfg, seed, pr.full_train.num_classes);
        std::vector<AugmentationMethod> candidates;
        for (const auto& name : cfg.analyze_methods) candidates.push_back(method_from_name(name));
        AugmentationSelection sel =
            select_augmentation(ck.params, vocab, d_c, candidates, mix_seed(seed, "select_aug"));
        std::string sel_text = "selected = " + to_string(sel.selected.kind) + "\n";
        for (const auto& row : sel.table)
            sel_text += to_string(row.method.kind) + " mean_ce=" + std::to_string(row.mean_ce) +
                        " n=" + std::to_string(row.n_samples) + "\n";
        write_text(dir + "/selected_method.txt", sel_text);

        // Representation export: clean / poisoned / TS-augmented populations.
        LabeledDataset augmented;
        augmented.num_classes = clean_sources.num_classes;
        augmented.role = DatasetRole::augmented;
        {
            LabeledDataset tmp = clean_sources;
            tmp.role = DatasetRole::clean_subset;
            for (auto& s : tmp.samples) s.poisoned = false;
            AugmentBudget budget;
            budget.n_per_sample = 1;
            budget.seed = mix_seed(seed, "analyze_aug");
            augmented = generate_augmented_dataset(
                tmp, AugmentationMethod{AugmentKind::token_split}, budget);
        }
        std::vector<std::pair<std::string, const LabeledDataset*>> sets = {
            {"clean", &clean_sources}, {"poisoned", &poisoned}, {"augmented", &augmented}};
        export_representations(ck.params, vocab, sets, dir + "/representations.csv");

        // 2-D projection of the union for scatter plots.
        Mat all(static_cast<int>(clean_sources.size() + poisoned.size() + augmented.size()),
                ck.params.cfg.hidden_dim);
        std::vector<std::string> tags;
        std::vector<std::string> ids;
        int row = 0;
        for (const auto& [tag, dset] : sets) {
            Mat vecs = collect_cls_vectors(ck.params, vocab, *dset);
            for (int i = 0; i < vecs.rows; ++i) {
                std::copy_n(vecs.row(i), vecs.cols, all.row(row++));
                tags.push_back(tag);
                ids.push_back(dset->samples[i].id);
            }
        }
        Mat proj = linear_project_2d(all);
        {
            std::ofstream scat(dir + "/scatter_2d.csv");
            if (!scat) throw std::runtime_error("cannot write scatter_2d.csv");
            scat << "tag,id,x,y\n";
            char buf[80];
            for (int i = 0; i < proj.rows; ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g,%.17g", proj.at(i, 0), proj.at(i, 1));
                scat << tags[i] << "," << ids[i] << "," << buf << "\n";
            }
        }

        nlohmann::json summary;
        summary["seed"] = seed;
        summary["selected_method"] = to_string(sel.selected.kind);
        nlohmann::json table = nlohmann::json::array();
        for (const auto& r : ce_rows)
            table.push_back({{"method", to_string(r.method.kind)},
                             {"mean_ce", r.global_mean},
                             {"n", r.n_samples}});
        summary["ce_table"] = table;
        write_json(dir + "/analysis.json", summary);
        out.push_back(summary);
    }
    return out;
}

nlohmann::json cmd_report(const ExperimentConfig& cfg) {
    nlohmann::json rows = nlohmann::json::array();
    std::map<std::string, std::vector<double>> cacc_by_tag, asr_by_tag;
    for (const auto& entry : fs::recursive_directory_iterator(cfg.out_dir)) {
        if (entry.path().filename() != "metrics.json") continue;
        nlohmann::json m = read_json(entry.path().string());
        rows.push_back(m);
        const std::string tag = m.value("attack", "") + " | " + m.value("defense", "");
        cacc_by_tag[tag].push_back(m.value("cacc", 0.0));
        asr_by_tag[tag].push_back(m.value("asr", 0.0));
    }
    std::sort(rows.begin(), rows.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
        return a.dump() < b.dump();
    });

    nlohmann::json agg = nlohmann::json::array();
    for (const auto& [tag, caccs] : cacc_by_tag) {
        agg.push_back({{"setting", tag},
                       {"n_seeds", caccs.size()},
                       {"cacc_median", median(caccs)},
                       {"asr_median", median(asr_by_tag[tag])},
                       {"cacc_per_seed", caccs},
                       {"asr_per_seed", asr_by_tag[tag]}});
    }
    nlohmann::json report = {{"config_hash", config_hash(cfg)},
                             {"runs", rows},
                             {"aggregate", agg}};
    write_json(cfg.out_dir + "/report.json", report);
    return report;
}

}  // namespace mbtsad
