// ghost: searching/selection pipeline, FedSGD simulation, attacks, metrics
// and theory validation over the desk-scale corpus formats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "ghost/attacks.hpp"
#include "ghost/fedsim.hpp"
#include "ghost/metrics.hpp"
#include "ghost/shadow_search.hpp"
#include "ghost/shadow_select.hpp"
#include "ghost/synth.hpp"
#include "ghost/theory.hpp"
#include "ghost/toymodel.hpp"

using namespace ghost;

namespace {

struct CommonArgs {
    uint64_t seed = 1;
    unsigned threads = std::thread::hardware_concurrency();
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--seed", args.seed, "master random seed")->envname("GHOST_SEED");
    cmd->add_option("--threads", args.threads, "worker threads (default: available cores)");
}

struct ModelArgs {
    std::string checkpoint;
    int n_layers = 2;
    int n_heads = 2;
    int d_ff = 32;
    int max_len = 16;
    int n_classes = 2;
    uint64_t model_seed = 11;
};

void add_model(CLI::App* cmd, ModelArgs& args) {
    cmd->add_option("--model", args.checkpoint, "model checkpoint to load");
    cmd->add_option("--layers", args.n_layers, "transformer blocks");
    cmd->add_option("--heads", args.n_heads, "attention heads");
    cmd->add_option("--d-ff", args.d_ff, "feed-forward width");
    cmd->add_option("--max-len", args.max_len, "maximum sequence length");
    cmd->add_option("--classes", args.n_classes, "number of classes");
    cmd->add_option("--model-seed", args.model_seed, "initialization seed");
}

ToyModel make_model(const ModelArgs& args, const EmbeddingTable& table) {
    if (!args.checkpoint.empty()) return ToyModel::load(args.checkpoint);
    ModelConfig cfg;
    cfg.n_layers = args.n_layers;
    cfg.n_heads = args.n_heads;
    cfg.d_ff = args.d_ff;
    cfg.max_len = args.max_len;
    cfg.n_classes = args.n_classes;
    cfg.seed = args.model_seed;
    return ToyModel::init_with_embeddings(cfg, table);
}

struct SearchArgs {
    int k0 = 70;
    double tau_o = 0.1;
    bool no_indirect = false;
    bool no_direct = false;
    bool no_lemma = false;
};

void add_search(CLI::App* cmd, SearchArgs& args) {
    cmd->add_option("--k0", args.k0, "initial top-k");
    cmd->add_option("--tau-o", args.tau_o, "neighbor overlap threshold");
    cmd->add_flag("--no-indirect", args.no_indirect, "disable the indirect similarity filter");
    cmd->add_flag("--no-direct", args.no_direct, "disable the direct similarity filter");
    cmd->add_flag("--no-lemma", args.no_lemma, "disable the common-lemma filter");
}

ShadowParams make_params(const SearchArgs& args, size_t vocab_size) {
    ShadowParams p;
    p.k0 = std::min(args.k0, static_cast<int>(vocab_size) - 1);  // clamp for tiny vocabularies
    p.tau_o = args.tau_o;
    p.flags.use_indirect = !args.no_indirect;
    p.flags.use_direct = !args.no_direct;
    p.flags.use_lemma = !args.no_lemma;
    return p;
}

struct SelectArgs {
    int beam = 1;
    double tau_d = 1e-6;
    int max_sweeps = 20;
    std::string mode = "optimized";
};

void add_select(CLI::App* cmd, SelectArgs& args) {
    cmd->add_option("--beam", args.beam, "beam width");
    cmd->add_option("--tau-d", args.tau_d, "early-stop MSE improvement threshold");
    cmd->add_option("--max-sweeps", args.max_sweeps, "sweep cap");
    cmd->add_option("--mode", args.mode, "selection mode: optimized|random|nearest");
}

SelectConfig make_select(const SelectArgs& args, uint64_t seed) {
    SelectConfig cfg;
    cfg.beam_width = args.beam;
    cfg.tau_d = args.tau_d;
    cfg.max_sweeps = args.max_sweeps;
    cfg.mode = select_mode_from_string(args.mode);
    cfg.seed = seed;
    return cfg;
}

// JSON config support: values become flag tokens injected ahead of the user's
// own flags, so explicit flags win
std::vector<std::string> config_tokens(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("config: bad JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("config: top level must be an object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : j.items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + key);
        } else if (value.is_string()) {
            tokens.push_back("--" + key);
            tokens.push_back(value.get<std::string>());
        } else {
            tokens.push_back("--" + key);
            tokens.push_back(value.dump());
        }
    }
    return tokens;
}

int run_cli(int argc, char** argv);

// ---------------------------------------------------------------------------

int cmd_gen(const std::string& out_dir, const SynthSpec& spec) {
    std::filesystem::create_directories(out_dir);
    const auto corpus = generate_corpus(spec);
    const auto base = std::filesystem::path(out_dir);
    save_embeddings((base / "corpus.ghem").string(), corpus.vocab, corpus.table);
    save_lemmas((base / "lemmas.tsv").string(), corpus.lemmas);
    save_dataset((base / "train.jsonl").string(), corpus.train);
    save_dataset((base / "test.jsonl").string(), corpus.test);
    std::printf("gen: vocab=%d dim=%d train=%zu test=%zu -> %s\n", spec.vocab_size, spec.dim,
                corpus.train.size(), corpus.test.size(), out_dir.c_str());
    return 0;
}

int cmd_search(const std::string& embeddings, const std::string& lemmas_path,
               const std::string& out, const SearchArgs& sargs, const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto lemmas = load_lemmas(lemmas_path);
    const auto params = make_params(sargs, vocab.size());
    const auto map = search_shadow_tokens(vocab, table, lemmas, params, common.threads);
    save_shadow_map(out, map);
    const size_t fallbacks = map.fallback_count();
    std::printf("search: %zu entries, k0=%d tau_o=%g -> %s\n", map.entries.size(), params.k0,
                params.tau_o, out.c_str());
    if (fallbacks > 0)
        std::fprintf(stderr, "warning: %zu tokens exhausted escalation and use the max-distance fallback\n",
                     fallbacks);
    return 0;
}

int cmd_obfuscate(const std::string& embeddings, const std::string& map_path,
                  const std::string& data_path, const std::string& out, const ModelArgs& margs,
                  const SelectArgs& sargs, const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto map = load_shadow_map(map_path);
    const auto data = load_dataset(data_path, vocab);
    const auto model = make_model(margs, table);
    const auto cfg = make_select(sargs, common.seed);
    const auto [pairs, stats] = obfuscate_dataset(data, model, map, cfg, common.threads);
    save_obfuscated(out, pairs, vocab);
    std::printf("obfuscate: %zu sentences, mean_mse=%.6f change_rate=%.4f mean_sweeps=%.2f -> %s\n",
                stats.n_sentences, stats.mean_final_mse, stats.mean_token_change_rate,
                stats.mean_sweeps, out.c_str());
    if (stats.passthrough_positions > 0)
        std::fprintf(stderr, "warning: %zu positions passed through unmapped\n",
                     stats.passthrough_positions);
    return 0;
}

struct FedArgs {
    int batch_size = 32;
    double lr = 1e-5;
    int max_epochs = 50;
    int patience = 5;
    double eval_split = 0.2;
    std::string defense = "none";
    double noise_sigma = 0.05;
    double noise_clip = 1.0;
    double prune_ratio = 0.99;
};

void add_fed(CLI::App* cmd, FedArgs& args) {
    cmd->add_option("--batch-size", args.batch_size, "batch size");
    cmd->add_option("--lr", args.lr, "learning rate");
    cmd->add_option("--epochs", args.max_epochs, "maximum epochs");
    cmd->add_option("--patience", args.patience, "early-stopping patience");
    cmd->add_option("--eval-split", args.eval_split, "held-out fraction for early stopping");
    cmd->add_option("--defense", args.defense, "gradient defense: none|noise|prune|ghost");
    cmd->add_option("--noise-sigma", args.noise_sigma, "noise defense sigma");
    cmd->add_option("--clip", args.noise_clip, "noise defense clip norm");
    cmd->add_option("--prune-ratio", args.prune_ratio, "prune defense ratio");
}

FedConfig make_fed(const FedArgs& args, uint64_t seed) {
    FedConfig cfg;
    cfg.batch_size = args.batch_size;
    cfg.lr = args.lr;
    cfg.max_epochs = args.max_epochs;
    cfg.patience = args.patience;
    cfg.eval_split = args.eval_split;
    cfg.defense = defense_from_string(args.defense);
    cfg.noise_sigma = args.noise_sigma;
    cfg.noise_clip = args.noise_clip;
    cfg.prune_ratio = args.prune_ratio;
    cfg.seed = seed;
    return cfg;
}

int cmd_train(const std::string& embeddings, const std::string& data_path,
              const std::string& text_field, const std::string& out_model,
              const std::string& rounds_path, const std::string& test_path,
              const ModelArgs& margs, const FedArgs& fargs, const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto data = load_dataset(data_path, vocab, text_field);
    const auto model = make_model(margs, table);
    const auto cfg = make_fed(fargs, common.seed);
    const auto result = fedsgd_run(model, data, cfg);
    result.model.save(out_model);
    if (!rounds_path.empty()) save_round_logs(rounds_path, cfg, result.rounds);
    std::printf("train: %d epochs (%s), %zu rounds, final eval loss %.6f -> %s\n",
                result.epochs_run, result.early_stopped ? "early stop" : "epoch cap",
                result.rounds.size(), result.eval_losses.back(), out_model.c_str());
    if (!test_path.empty()) {
        const auto test = load_dataset(test_path, vocab);
        const auto rep = evaluate(result.model, test);
        std::printf("eval: loss=%.6f acc=%.4f f1=%.4f ppl=%.4f\n", rep.loss, rep.accuracy, rep.f1,
                    rep.perplexity);
    }
    return 0;
}

int cmd_attack(const std::string& attacker, const std::string& rounds_path,
               const std::string& model_path, const std::string& embeddings,
               const std::string& lemmas_path, const std::string& data_path,
               const std::string& originals_path, const std::string& map_path,
               const std::string& strategy, const std::string& out, int iters, double lr_a,
               int round_filter, const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto lemmas = load_lemmas(lemmas_path);

    std::ofstream report(out, std::ios::binary);
    if (!report) throw Error("attack: cannot write '" + out + "'");

    auto emit = [&](size_t id, const AttackResult& res, std::span<const TokenId> original,
                    bool bag_scored) {
        nlohmann::json j;
        j["id"] = id;
        j["attacker"] = res.attacker;
        j["recovered_text"] = detokenize(res.recovered, vocab);
        const auto cand = id_to_surface(res.recovered, vocab);
        const auto ref = id_to_surface(original, vocab);
        j["r1"] = bag_scored ? bag_rouge1(res.recovered, original)
                             : rouge_n(cand, ref, 1);
        j["meteor"] = meteor_lite(cand, ref, lemmas);
        report << j.dump() << '\n';
        return j["r1"].get<double>();
    };

    double mean_r1 = 0.0;
    size_t count = 0;

    if (attacker == "adaptive") {
        if (map_path.empty() || originals_path.empty())
            throw Error("attack: adaptive needs --map and --pairs");
        const auto map = load_shadow_map(map_path);
        const auto rev = reverse_map(map);
        const auto pairs = load_obfuscated(originals_path, vocab);
        const auto strat = adaptive_strategy_from_string(strategy);
        for (size_t i = 0; i < pairs.size(); ++i) {
            const auto res = adaptive_recover(pairs[i].obfuscated.tokens, rev, table, strat,
                                              derive_seed(common.seed, i));
            mean_r1 += emit(i, res, pairs[i].original.tokens, false);
            ++count;
        }
    } else {
        if (rounds_path.empty() || model_path.empty() || data_path.empty())
            throw Error("attack: " + attacker + " needs --rounds, --model and --data");
        const auto model = ToyModel::load(model_path);
        const auto [fed_cfg, rounds] = load_round_logs(rounds_path);
        (void)fed_cfg;
        const auto data = load_dataset(data_path, vocab);
        // when the rounds came from obfuscated training, score against the
        // original sentences instead
        std::vector<ObfuscatedPair> pairs;
        if (!originals_path.empty()) pairs = load_obfuscated(originals_path, vocab);

        for (const auto& log : rounds) {
            if (round_filter >= 0 && log.round != round_filter) continue;
            if (log.batch_ids.size() != 1) continue;  // inversion targets batch 1
            const size_t target = log.batch_ids[0];
            if (target >= data.size()) throw Error("attack: round references a missing sentence");
            const auto& original =
                pairs.empty() ? data[target].tokens : pairs[target].original.tokens;
            AttackResult res;
            if (attacker == "leakage") {
                res = embedding_leakage_attack(log, model);
                mean_r1 += emit(log.round, res, original, true);
            } else if (attacker == "matching") {
                res = gradient_matching_attack(log, model, table,
                                               static_cast<int>(data[target].tokens.size()),
                                               data[target].label, iters, lr_a,
                                               derive_seed(common.seed, static_cast<uint64_t>(log.round)));
                mean_r1 += emit(log.round, res, original, false);
            } else {
                throw Error("attack: unknown attacker '" + attacker +
                            "' (leakage|matching|adaptive)");
            }
            ++count;
        }
    }
    if (count > 0) mean_r1 /= static_cast<double>(count);
    std::printf("attack %s: %zu targets, mean R-1 %.4f -> %s\n", attacker.c_str(), count, mean_r1,
                out.c_str());
    return 0;
}

int cmd_metrics(const std::string& embeddings, const std::string& lemmas_path,
                const std::string& pairs_path, const std::string& candidates_path,
                const std::string& references_path, const std::string& out) {
    const auto [vocab, table] = load_embeddings(embeddings);
    (void)table;
    const auto lemmas = load_lemmas(lemmas_path);
    std::vector<std::vector<TokenId>> cands, refs;
    if (!pairs_path.empty()) {
        for (const auto& p : load_obfuscated(pairs_path, vocab)) {
            cands.push_back(p.obfuscated.tokens);
            refs.push_back(p.original.tokens);
        }
    } else {
        if (candidates_path.empty() || references_path.empty())
            throw Error("metrics: need --pairs or both --candidates and --references");
        for (const auto& s : load_dataset(candidates_path, vocab)) cands.push_back(s.tokens);
        for (const auto& s : load_dataset(references_path, vocab)) refs.push_back(s.tokens);
    }
    const auto report = similarity_report(cands, refs, vocab, lemmas);
    std::ofstream out_file(out, std::ios::binary);
    if (!out_file) throw Error("metrics: cannot write '" + out + "'");
    out_file << similarity_report_to_json(report) << '\n';
    std::printf("metrics: n=%zu r1=%.4f r2=%.4f rl=%.4f meteor=%.4f -> %s\n", report.n_pairs,
                report.r1, report.r2, report.rl, report.meteor, out.c_str());
    return 0;
}

int cmd_theory(const std::string& embeddings, const std::string& map_path,
               const std::string& data_path, const std::string& out_dir, size_t max_pairs,
               bool svg, const ModelArgs& margs, const SelectArgs& sargs, const FedArgs& fargs,
               const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto map = load_shadow_map(map_path);
    const auto data = load_dataset(data_path, vocab);
    std::filesystem::create_directories(out_dir);

    const auto pretrained = make_model(margs, table);
    const auto sel = make_select(sargs, derive_seed(common.seed, 101));
    const auto [pairs, stats] = obfuscate_dataset(data, pretrained, map, sel, common.threads);
    (void)stats;
    std::vector<LabeledSentence> obf_train;
    obf_train.reserve(pairs.size());
    for (const auto& p : pairs) obf_train.push_back(p.obfuscated);

    auto fed = make_fed(fargs, derive_seed(common.seed, 102));
    const auto run_orig = fedsgd_run(pretrained, data, fed);
    fed.defense = DefenseKind::ghost;
    const auto run_obf = fedsgd_run(pretrained, obf_train, fed);

    std::vector<ObfuscatedPair> dev_pairs(pairs.begin(),
                                          pairs.begin() + static_cast<long>(std::min(max_pairs, pairs.size())));
    const auto set = compute_deviations(pretrained, run_orig.model, run_obf.model, dev_pairs);
    const auto reg = deviation_regression(set.records);

    const auto base = std::filesystem::path(out_dir);
    save_deviations_csv((base / "deviations.csv").string(), set.records);
    std::ofstream reg_out((base / "regression.json").string(), std::ios::binary);
    reg_out << regression_summary_to_json(reg, set) << '\n';
    reg_out.close();
    if (svg) save_deviations_svg((base / "scatter.svg").string(), set.records);

    std::printf("theory: %zu pairs, drift(theta*)=%.4f drift(theta~)=%.4f\n", set.records.size(),
                set.drift.eps_theta_star, set.drift.eps_theta_tilde);
    std::printf("theory: mean dev loss=%.6f grad=%.6f | slope loss=%.6f grad=%.6f -> %s\n",
                reg.mean_loss_dev, reg.mean_grad_dev, reg.slope_loss, reg.slope_grad,
                out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& embeddings, const std::string& lemmas_path,
               const std::string& data_path, const std::string& test_path,
               const std::string& out, const SearchArgs& sargs, const SelectArgs& sel_args,
               const ModelArgs& margs, const FedArgs& fargs, bool train_utility,
               const CommonArgs& common) {
    const auto [vocab, table] = load_embeddings(embeddings);
    const auto lemmas = load_lemmas(lemmas_path);
    const auto data = load_dataset(data_path, vocab);
    const auto model = make_model(margs, table);
    NeighborIndex index(table, static_cast<int>(table.rows()) - 1, common.threads);

    std::vector<LabeledSentence> test;
    if (train_utility) {
        if (test_path.empty()) throw Error("ablate: --train-utility needs --test");
        test = load_dataset(test_path, vocab);
    }

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw Error("ablate: cannot write '" + out + "'");
    csv << "use_indirect,use_direct,use_lemma,mode,r1,r2,rl,meteor,mean_mse,change_rate";
    if (train_utility) csv << ",acc,f1";
    csv << "\n";

    const char* modes[] = {"optimized", "nearest", "random"};
    for (int mask = 0; mask < 8; ++mask) {
        SearchArgs combo = sargs;
        combo.no_indirect = (mask & 1) != 0;
        combo.no_direct = (mask & 2) != 0;
        combo.no_lemma = (mask & 4) != 0;
        const auto params = make_params(combo, vocab.size());
        const auto map = search_shadow_tokens(vocab, index, lemmas, params, common.threads);
        for (const char* mode : modes) {
            SelectArgs sa = sel_args;
            sa.mode = mode;
            const auto cfg = make_select(sa, common.seed);
            const auto [pairs, stats] = obfuscate_dataset(data, model, map, cfg, common.threads);
            std::vector<std::vector<TokenId>> cands, refs;
            for (const auto& p : pairs) {
                cands.push_back(p.obfuscated.tokens);
                refs.push_back(p.original.tokens);
            }
            const auto rep = similarity_report(cands, refs, vocab, lemmas);
            char row[512];
            std::snprintf(row, sizeof(row), "%d,%d,%d,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                          params.flags.use_indirect ? 1 : 0, params.flags.use_direct ? 1 : 0,
                          params.flags.use_lemma ? 1 : 0, mode, rep.r1, rep.r2, rep.rl, rep.meteor,
                          stats.mean_final_mse, stats.mean_token_change_rate);
            csv << row;
            if (train_utility) {
                std::vector<LabeledSentence> obf_train;
                for (const auto& p : pairs) obf_train.push_back(p.obfuscated);
                auto fed = make_fed(fargs, common.seed);
                fed.defense = DefenseKind::ghost;
                const auto run = fedsgd_run(model, obf_train, fed);
                const auto ev = evaluate(run.model, test);
                std::snprintf(row, sizeof(row), ",%.6f,%.6f", ev.accuracy, ev.f1);
                csv << row;
            }
            csv << "\n";
        }
    }
    std::printf("ablate: 8 heuristic combinations x 3 modes -> %s\n", out.c_str());
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"token-level gradient-inversion defense pipeline"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    // config-file tokens are injected ahead of explicit flags; last one wins
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    // gen ------------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
    std::string gen_out = "corpus";
    SynthSpec spec;
    CommonArgs gen_common;
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--vocab-size", spec.vocab_size, "vocabulary size");
    gen->add_option("--dim", spec.dim, "embedding dimension");
    gen->add_option("--clusters", spec.n_lemma_clusters, "lemma clusters");
    gen->add_option("--radius", spec.cluster_radius, "cluster radius");
    gen->add_option("--classes", spec.n_classes, "number of classes");
    gen->add_option("--signal-per-class", spec.signal_tokens_per_class, "signal tokens per class");
    gen->add_option("--signal-strength", spec.signal_strength, "class signal strength");
    gen->add_option("--min-len", spec.min_sentence_len, "minimum sentence length");
    gen->add_option("--max-len", spec.max_sentence_len, "maximum sentence length");
    gen->add_option("--train", spec.n_train, "training sentences");
    gen->add_option("--test", spec.n_test, "test sentences");
    add_common(gen, gen_common);

    // search ---------------------------------------------------------------
    auto* search = app.add_subcommand("search", "build the shadow-token map");
    std::string s_embeddings, s_lemmas, s_out = "map.json";
    SearchArgs s_args;
    CommonArgs s_common;
    search->add_option("--embeddings", s_embeddings, "GHEM embedding file")->required();
    search->add_option("--lemmas", s_lemmas, "lemma tsv")->required();
    search->add_option("--out", s_out, "output map path");
    add_search(search, s_args);
    add_common(search, s_common);

    // obfuscate --------------------------------------------------------------
    auto* obf = app.add_subcommand("obfuscate", "select shadow tokens for a dataset");
    std::string o_embeddings, o_map, o_data, o_out = "obfuscated.jsonl";
    ModelArgs o_model;
    SelectArgs o_select;
    CommonArgs o_common;
    obf->add_option("--embeddings", o_embeddings, "GHEM embedding file")->required();
    obf->add_option("--map", o_map, "shadow map json")->required();
    obf->add_option("--data", o_data, "dataset jsonl")->required();
    obf->add_option("--out", o_out, "output jsonl");
    add_model(obf, o_model);
    add_select(obf, o_select);
    add_common(obf, o_common);

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "FedSGD fine-tune with optional defense");
    std::string t_embeddings, t_data, t_field = "text", t_out = "model.ckpt", t_rounds, t_test;
    ModelArgs t_model;
    FedArgs t_fed;
    CommonArgs t_common;
    train->add_option("--embeddings", t_embeddings, "GHEM embedding file")->required();
    train->add_option("--data", t_data, "training jsonl")->required();
    train->add_option("--text-field", t_field, "dataset text field (text|obf_text)");
    train->add_option("--out-model", t_out, "checkpoint output");
    train->add_option("--rounds", t_rounds, "round log jsonl output");
    train->add_option("--test", t_test, "optional test jsonl for a final report");
    add_model(train, t_model);
    add_fed(train, t_fed);
    add_common(train, t_common);

    // attack -----------------------------------------------------------------
    auto* attack = app.add_subcommand("attack", "run a gradient-inversion attacker");
    std::string a_name = "leakage", a_rounds, a_model, a_embeddings, a_lemmas, a_data, a_pairs,
                a_map, a_strategy = "max", a_out = "attack.jsonl";
    int a_iters = 400, a_round = -1;
    double a_lr = 0.1;
    CommonArgs a_common;
    attack->add_option("--attacker", a_name, "leakage|matching|adaptive")->required();
    attack->add_option("--rounds", a_rounds, "round log jsonl");
    attack->add_option("--model", a_model, "model checkpoint");
    attack->add_option("--embeddings", a_embeddings, "GHEM embedding file")->required();
    attack->add_option("--lemmas", a_lemmas, "lemma tsv")->required();
    attack->add_option("--data", a_data, "training jsonl the rounds refer to");
    attack->add_option("--pairs", a_pairs, "obfuscated jsonl (original/obfuscated pairs)");
    attack->add_option("--map", a_map, "shadow map json (adaptive)");
    attack->add_option("--strategy", a_strategy, "adaptive strategy: sampling|max|median|mean");
    attack->add_option("--iters", a_iters, "matching iterations");
    attack->add_option("--lr-a", a_lr, "matching step size");
    attack->add_option("--round", a_round, "restrict to one round index");
    attack->add_option("--out", a_out, "report jsonl");
    add_common(attack, a_common);

    // metrics ----------------------------------------------------------------
    auto* metrics = app.add_subcommand("metrics", "similarity metrics over sentence pairs");
    std::string m_embeddings, m_lemmas, m_pairs, m_cands, m_refs, m_out = "metrics.json";
    metrics->add_option("--embeddings", m_embeddings, "GHEM embedding file")->required();
    metrics->add_option("--lemmas", m_lemmas, "lemma tsv")->required();
    metrics->add_option("--pairs", m_pairs, "obfuscated jsonl");
    metrics->add_option("--candidates", m_cands, "candidate jsonl");
    metrics->add_option("--references", m_refs, "reference jsonl");
    metrics->add_option("--out", m_out, "report json");

    // theory -----------------------------------------------------------------
    auto* theory = app.add_subcommand("theory", "deviation bounds and regression validation");
    std::string th_embeddings, th_map, th_data, th_out = "theory";
    size_t th_pairs = 100;
    bool th_svg = false;
    ModelArgs th_model;
    SelectArgs th_select;
    FedArgs th_fed;
    CommonArgs th_common;
    theory->add_option("--embeddings", th_embeddings, "GHEM embedding file")->required();
    theory->add_option("--map", th_map, "shadow map json")->required();
    theory->add_option("--data", th_data, "training jsonl")->required();
    theory->add_option("--out-dir", th_out, "output directory");
    theory->add_option("--pairs", th_pairs, "deviation pairs to record");
    theory->add_flag("--svg", th_svg, "also emit a scatter plot");
    add_model(theory, th_model);
    add_select(theory, th_select);
    add_fed(theory, th_fed);
    add_common(theory, th_common);

    // ablate -----------------------------------------------------------------
    auto* ablate = app.add_subcommand("ablate", "heuristic/mode grid study");
    std::string ab_embeddings, ab_lemmas, ab_data, ab_test, ab_out = "ablate.csv";
    bool ab_utility = false;
    SearchArgs ab_search;
    SelectArgs ab_select;
    ModelArgs ab_model;
    FedArgs ab_fed;
    CommonArgs ab_common;
    ablate->add_option("--embeddings", ab_embeddings, "GHEM embedding file")->required();
    ablate->add_option("--lemmas", ab_lemmas, "lemma tsv")->required();
    ablate->add_option("--data", ab_data, "dataset jsonl")->required();
    ablate->add_option("--test", ab_test, "test jsonl (used with --train-utility)");
    ablate->add_option("--out", ab_out, "consolidated csv");
    ablate->add_flag("--train-utility", ab_utility, "also fine-tune and report utility per cell");
    add_search(ablate, ab_search);
    add_select(ablate, ab_select);
    add_model(ablate, ab_model);
    add_fed(ablate, ab_fed);
    add_common(ablate, ab_common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help for -h, a diagnostic otherwise
        return code == 0 ? 0 : 2;
    }

    if (gen->parsed()) {
        spec.seed = gen_common.seed;
        return cmd_gen(gen_out, spec);
    }
    if (search->parsed()) return cmd_search(s_embeddings, s_lemmas, s_out, s_args, s_common);
    if (obf->parsed())
        return cmd_obfuscate(o_embeddings, o_map, o_data, o_out, o_model, o_select, o_common);
    if (train->parsed())
        return cmd_train(t_embeddings, t_data, t_field, t_out, t_rounds, t_test, t_model, t_fed,
                         t_common);
    if (attack->parsed())
        return cmd_attack(a_name, a_rounds, a_model, a_embeddings, a_lemmas, a_data, a_pairs,
                          a_map, a_strategy, a_out, a_iters, a_lr, a_round, a_common);
    if (metrics->parsed()) return cmd_metrics(m_embeddings, m_lemmas, m_pairs, m_cands, m_refs, m_out);
    if (theory->parsed())
        return cmd_theory(th_embeddings, th_map, th_data, th_out, th_pairs, th_svg, th_model,
                          th_select, th_fed, th_common);
    if (ablate->parsed())
        return cmd_ablate(ab_embeddings, ab_lemmas, ab_data, ab_test, ab_out, ab_search, ab_select,
                          ab_model, ab_fed, ab_utility, ab_common);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    // --config file.json expands into flags placed before the user's own
    std::vector<std::string> args;
    std::string config_path;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--config" && i + 1 < argc) {
            config_path = argv[++i];
        } else {
            args.emplace_back(argv[i]);
        }
    }
    try {
        if (!config_path.empty() && !args.empty()) {
            const auto extra = config_tokens(config_path);
            args.insert(args.begin() + 1, extra.begin(), extra.end());
        }
        std::vector<char*> argv2;
        argv2.push_back(argv[0]);
        for (auto& a : args) argv2.push_back(a.data());
        return run_cli(static_cast<int>(argv2.size()), argv2.data());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
