#include "vhdlx/cli.hpp"

#include "vhdlx/analytics.hpp"
#include "vhdlx/corpus.hpp"
#include "vhdlx/error.hpp"
#include "vhdlx/eval_service.hpp"
#include "vhdlx/inference.hpp"
#include "vhdlx/judging.hpp"
#include "vhdlx/merge.hpp"
#include "vhdlx/testset.hpp"
#include "vhdlx/text.hpp"
#include "vhdlx/tokenizer.hpp"
#include "vhdlx/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace vhdlx::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kVersion = "0.1.0";

struct Context {
    std::string workdir = ".";
    std::uint64_t seed = 0;
    std::string run_manifest = "vhdlx-run.json";
    bool no_manifest = false;
    std::ostream* out = &std::cout;
    std::ostream* err = &std::cerr;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    std::string path(const std::string& p) const {
        if (p.empty() || p == "-" || fs::path(p).is_absolute()) return p;
        return (fs::path(workdir) / p).string();
    }
    std::string input(const std::string& p) {
        auto resolved = path(p);
        inputs.push_back(resolved);
        return resolved;
    }
    std::string output(const std::string& p) {
        auto resolved = path(p);
        outputs.push_back(resolved);
        return resolved;
    }
};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// "label=value" pairs.
std::pair<std::string, std::string> split_assignment(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("InvalidArgument", "expected name=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw Error("InvalidArgument", "not a number: '" + s + "'");
    return v;
}

// --set may name a directory holding testset.jsonl or the file itself.
std::string set_file(Context& ctx, const std::string& set) {
    const auto p = ctx.path(set);
    return ctx.input(fs::is_directory(p) ? (fs::path(p) / "testset.jsonl").string() : set);
}

// --script may be a file path or a name under <set dir>/scripts.
std::string script_file(Context& ctx, const std::string& set, const std::string& script) {
    if (script.ends_with(".json") || script.find('/') != std::string::npos) return ctx.input(script);
    const auto p = ctx.path(set);
    const fs::path dir = fs::is_directory(p) ? fs::path(p) : fs::path(p).parent_path();
    return ctx.input((dir / "scripts" / (script + ".json")).string());
}

struct BackendOptions {
    std::string kind = "mock";
    std::string script;
    std::string endpoint;
    int timeout_ms = 30000;
    int retries = 2;
};

std::unique_ptr<inference::Backend> make_backend(Context& ctx, const std::string& set, const BackendOptions& o,
                                                 const std::string& role) {
    if (o.kind == "mock") {
        if (o.script.empty()) throw Error("InvalidArgument", role + ": mock backend needs a script");
        return std::make_unique<inference::MockBackend>(inference::MockBackend::load(script_file(ctx, set, o.script)));
    }
    if (o.endpoint.empty()) throw Error("InvalidArgument", role + ": http backend needs an endpoint");
    inference::HttpBackend::Options opts;
    opts.timeout = std::chrono::milliseconds(o.timeout_ms);
    opts.retries = o.retries;
    return std::make_unique<inference::HttpBackend>(o.endpoint, opts);
}

corpus::FilterRuleSet load_rules(Context& ctx, const std::string& file) {
    corpus::FilterRuleSet rules;
    if (file.empty()) return rules;
    try {
        const auto j = nlohmann::json::parse(text::read_file(ctx.input(file)));
        if (j.contains("allowlist")) rules.code_language_allowlist = j["allowlist"].get<std::set<std::string>>();
        rules.link_text_ratio_threshold = j.value("link_text_ratio_threshold", rules.link_text_ratio_threshold);
        if (j.contains("logistics_keywords"))
            rules.logistics_keywords = j["logistics_keywords"].get<std::vector<std::string>>();
        rules.logistics_hit_threshold = j.value("logistics_hit_threshold", rules.logistics_hit_threshold);
    } catch (const nlohmann::json::exception& ex) {
        throw Error("InvalidRules", file + ": " + ex.what());
    }
    rules.validate();
    return rules;
}

corpus::FormatPriority parse_priority(const std::string& s) {
    if (s.empty()) return corpus::default_format_priority();
    corpus::FormatPriority out;
    for (const auto& part : text::split(s, ',')) out.push_back(corpus::parse_kind(text::trim(part)));
    return out;
}

struct CorpusInput {
    std::string manifest;
    std::string root;
};

std::vector<corpus::SourceDocument> load_corpus(Context& ctx, const CorpusInput& in) {
    const auto manifest = ctx.input(in.manifest);
    const auto root = in.root.empty() ? fs::path(manifest).parent_path().string() : ctx.path(in.root);
    return corpus::load_manifest(manifest, root);
}

// Writes documents under out_dir at their paths, plus manifest.jsonl and report.json.
void write_corpus(Context& ctx, const std::string& out_dir, const std::vector<corpus::SourceDocument>& docs,
                  const std::vector<corpus::PipelineReport>& reports) {
    const fs::path dir = ctx.output(out_dir);
    fs::create_directories(dir);
    std::string manifest;
    for (const auto& d : docs) {
        const fs::path target = dir / d.path;
        fs::create_directories(target.parent_path());
        text::write_file(target.string(), d.content);
        manifest += corpus::manifest_record(d).dump() + "\n";
    }
    text::write_file((dir / "manifest.jsonl").string(), manifest);
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : reports) j.push_back(corpus::to_json(r));
    text::write_file((dir / "report.json").string(), j.dump(2) + "\n");
}

void print_report(Context& ctx, const corpus::PipelineReport& r, const std::string& stage) {
    *ctx.out << stage << ": " << r.input_count << " in, " << r.kept_count << " kept, " << r.dropped_count
             << " dropped\n";
}

// Converted documents get a .md path so they do not overwrite their source name.
corpus::SourceDocument convert_with_path(const corpus::SourceDocument& doc, const corpus::ExternalConverter* conv) {
    const auto before = doc.kind;
    auto out = corpus::convert_to_markdown(doc, conv);
    if (before != out.kind) out.path = fs::path(out.path).replace_extension(".md").string();
    return out;
}

void print_stats(Context& ctx, const tokenizer::TokenStats& s) {
    auto millions = [](std::uint64_t n) { return fixed(static_cast<double>(n) / 1e6, 1) + "M"; };
    *ctx.out << "Data Type            Tokens\n";
    *ctx.out << "VHDL Code            " << millions(s.vhdl_code) << "\n";
    *ctx.out << "Other Code           " << millions(s.other_code) << "\n";
    *ctx.out << "Documents            " << millions(s.documents) << "\n";
    *ctx.out << "Total                " << millions(s.total()) << "\n";
}

std::vector<testset::CodeExplanationItem> ce_items(const std::vector<testset::TestItem>& items) {
    std::vector<testset::CodeExplanationItem> out;
    for (const auto& it : items)
        if (auto* ce = std::get_if<testset::CodeExplanationItem>(&it); ce && ce->status != testset::Status::dropped)
            out.push_back(*ce);
    return out;
}

std::vector<testset::MultipleChoiceItem> mc_items(const std::vector<testset::TestItem>& items) {
    std::vector<testset::MultipleChoiceItem> out;
    for (const auto& it : items)
        if (auto* mc = std::get_if<testset::MultipleChoiceItem>(&it); mc && mc->status != testset::Status::dropped)
            out.push_back(*mc);
    return out;
}

std::string run_id(const Context& ctx) { return "run-" + text::fnv1a64_hex(text::utc_timestamp() + std::to_string(ctx.seed)); }

void add_backend_flags(CLI::App* cmd, BackendOptions& o, const std::string& prefix) {
    cmd->add_option("--" + prefix + "backend", o.kind, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    cmd->add_option("--" + prefix + "script", o.script, "mock script name or path");
    cmd->add_option("--" + prefix + "endpoint", o.endpoint, "http://host:port/path");
    cmd->add_option("--" + prefix + "timeout-ms", o.timeout_ms)->check(CLI::PositiveNumber);
    cmd->add_option("--" + prefix + "retries", o.retries)->check(CLI::NonNegativeNumber);
}

void write_run_manifest(const Context& ctx, const std::vector<std::string>& args, const std::string& command,
                        int exit_code) {
    if (ctx.no_manifest) return;
    nlohmann::ordered_json j;
    j["tool"] = "vhdlx";
    j["version"] = kVersion;
    j["command"] = command;
    j["args"] = args;
    j["seed"] = ctx.seed;
    j["workdir"] = ctx.workdir;
    j["timestamp"] = text::utc_timestamp();
    j["inputs"] = nlohmann::ordered_json::array();
    for (const auto& in : ctx.inputs) {
        nlohmann::ordered_json rec;
        rec["path"] = in;
        std::error_code ec;
        if (fs::is_regular_file(in, ec)) rec["fnv1a64"] = text::fnv1a64_hex(text::read_file(in));
        j["inputs"].push_back(std::move(rec));
    }
    j["outputs"] = ctx.outputs;
    j["exit_code"] = exit_code;
    try {
        const fs::path target = ctx.path(ctx.run_manifest);
        std::error_code ec;
        if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
        text::write_file(target.string(), j.dump(2) + "\n");
    } catch (const Error& e) {
        *ctx.err << "warning: run manifest not written: " << e.what() << "\n";
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Context ctx;
    ctx.out = &out;
    ctx.err = &err;

    CLI::App app{"VHDL LLM customization toolkit: corpus preparation, evaluation, merging, rating service"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "TOML/INI file with default flag values");
    app.add_option("--seed", ctx.seed, "seed for every randomized step");
    app.add_option("--workdir", ctx.workdir, "root for relative paths");
    app.add_option("--manifest", ctx.run_manifest, "run manifest path");
    app.add_flag("--no-manifest", ctx.no_manifest, "do not write a run manifest");
    app.require_subcommand(1);

    std::map<CLI::App*, std::function<int()>> actions;

    // ---- corpus ----
    auto* corpus_cmd = app.add_subcommand("corpus", "corpus pipeline stages")->require_subcommand(1);
    CorpusInput cin;
    auto add_corpus_input = [&](CLI::App* c) {
        c->add_option("--input", cin.manifest, "corpus manifest (JSON lines)")->required();
        c->add_option("--root", cin.root, "directory document paths are relative to");
    };
    std::string out_dir, rules_file, priority, converter;

    std::vector<std::string> classify_files;
    auto* classify = corpus_cmd->add_subcommand("classify", "print the bucket of each file");
    classify->add_option("files", classify_files)->required();
    actions[classify] = [&] {
        for (const auto& f : classify_files) {
            const auto p = ctx.input(f);
            out << f << "\t" << corpus::to_string(corpus::classify_document(p, text::read_file(p))) << "\n";
        }
        return 0;
    };

    auto* filter = corpus_cmd->add_subcommand("filter", "drop non-allowlisted code, link-only and logistics pages");
    add_corpus_input(filter);
    filter->add_option("--rules", rules_file, "filter rules (JSON)");
    filter->add_option("--out-dir", out_dir)->required();
    actions[filter] = [&] {
        auto r = corpus::filter_documents(load_corpus(ctx, cin), load_rules(ctx, rules_file));
        write_corpus(ctx, out_dir, r.kept, {r.report});
        print_report(ctx, r.report, "filter");
        return 0;
    };

    auto* dedup = corpus_cmd->add_subcommand("dedup", "exact and cross-format deduplication");
    add_corpus_input(dedup);
    dedup->add_option("--priority", priority, "comma-separated kinds, highest first");
    dedup->add_option("--out-dir", out_dir)->required();
    actions[dedup] = [&] {
        auto exact = corpus::dedup_exact(load_corpus(ctx, cin));
        auto cross = corpus::dedup_cross_format(std::move(exact.kept), parse_priority(priority));
        write_corpus(ctx, out_dir, cross.kept, {exact.report, cross.report});
        print_report(ctx, exact.report, "dedup_exact");
        print_report(ctx, cross.report, "dedup_cross_format");
        return 0;
    };

    auto* convert = corpus_cmd->add_subcommand("convert", "convert html, office and pdf documents to markdown");
    add_corpus_input(convert);
    convert->add_option("--converter", converter, "command printing html for an office/pdf file")
        ->envname("VHDLX_CONVERTER");
    convert->add_option("--out-dir", out_dir)->required();
    actions[convert] = [&] {
        corpus::ExternalConverter ext{converter};
        const corpus::ExternalConverter* conv = converter.empty() ? nullptr : &ext;
        std::vector<corpus::SourceDocument> docs;
        for (const auto& d : load_corpus(ctx, cin)) {
            const bool needs = d.kind == corpus::DocKind::html || d.kind == corpus::DocKind::office_text ||
                               d.kind == corpus::DocKind::pdf;
            docs.push_back(needs ? convert_with_path(d, conv) : d);
        }
        corpus::PipelineReport rep;
        rep.input_count = rep.kept_count = docs.size();
        write_corpus(ctx, out_dir, docs, {rep});
        out << "convert: " << docs.size() << " documents\n";
        return 0;
    };

    std::string vocab_file, merges_file, stats_out, stats_load;
    auto add_tokenizer = [&](CLI::App* c, bool required) {
        auto* v = c->add_option("--vocab", vocab_file, "vocabulary file");
        auto* m = c->add_option("--merges", merges_file, "merges file");
        if (required) {
            v->required();
            m->required();
        }
    };
    auto load_tok = [&] { return tokenizer::load_bpe(ctx.input(vocab_file), ctx.input(merges_file)); };

    auto* tokenize = corpus_cmd->add_subcommand("tokenize", "count tokens per bucket");
    add_corpus_input(tokenize);
    add_tokenizer(tokenize, true);
    tokenize->add_option("--out", stats_out, "write counts as JSON");
    actions[tokenize] = [&] {
        const auto tok = load_tok();
        const auto docs = load_corpus(ctx, cin);
        const auto stats = tokenizer::count_tokens(tok, docs);
        if (!stats_out.empty()) text::write_file(ctx.output(stats_out), tokenizer::to_json(stats).dump(2) + "\n");
        print_stats(ctx, stats);
        return 0;
    };

    auto* stats = corpus_cmd->add_subcommand("stats", "print a token-count table");
    stats->add_option("--load", stats_load, "counts written by corpus tokenize")->required();
    actions[stats] = [&] {
        print_stats(ctx, tokenizer::stats_from_json(nlohmann::json::parse(text::read_file(ctx.input(stats_load)))));
        return 0;
    };

    // ---- pack ----
    std::size_t context_length = 8192;
    std::string shard_out;
    auto* pack = app.add_subcommand("pack", "tokenize a corpus and pack it into fixed-length windows");
    pack->add_option("--input", cin.manifest)->required();
    pack->add_option("--root", cin.root);
    add_tokenizer(pack, true);
    pack->add_option("--context", context_length)->check(CLI::Range(2, 65535));
    pack->add_option("--out", shard_out, "shard file")->required();
    actions[pack] = [&] {
        const auto tok = load_tok();
        std::vector<std::vector<tokenizer::TokenId>> docs;
        std::size_t tokens = 0;
        for (const auto& d : load_corpus(ctx, cin)) {
            docs.push_back(tok.encode(d.content));
            tokens += docs.back().size();
        }
        const auto seqs = training::pack_documents(docs, context_length, tok.eos_id(), tok.eos_id());
        training::write_shard(ctx.output(shard_out), seqs);
        out << "documents " << docs.size() << "\ntokens " << tokens << "\nwindows " << seqs.size() << "\n";
        return 0;
    };

    // ---- mix ----
    std::vector<std::string> pool_args, fraction_args;
    std::size_t n_chunks = 0;
    std::string schedule_out;
    auto* mix = app.add_subcommand("mix", "schedule chunks from data pools to a target mix");
    mix->add_option("--pool", pool_args, "label=available chunks")->required();
    mix->add_option("--fraction", fraction_args, "label=share (default replay/code/documents 0.40/0.28/0.32)");
    mix->add_option("-n,--chunks", n_chunks)->required()->check(CLI::PositiveNumber);
    mix->add_option("--out", schedule_out, "schedule as JSON lines");
    actions[mix] = [&] {
        std::vector<training::Pool> pools;
        for (const auto& p : pool_args) {
            auto [label, size] = split_assignment(p);
            pools.push_back({label, static_cast<std::size_t>(to_double(size))});
        }
        training::MixSpec spec = training::MixSpec::paper_default();
        if (!fraction_args.empty()) {
            spec.fractions.clear();
            for (const auto& f : fraction_args) {
                auto [label, share] = split_assignment(f);
                spec.fractions.emplace_back(label, to_double(share));
            }
        }
        const auto schedule = training::sample_mix(pools, spec, n_chunks, ctx.seed);
        if (!schedule_out.empty()) {
            std::string lines;
            for (const auto& c : schedule)
                lines += nlohmann::ordered_json{{"pool", c.pool}, {"chunk", c.chunk}}.dump() + "\n";
            text::write_file(ctx.output(schedule_out), lines);
        }
        for (const auto& [label, share] : spec.fractions) {
            const auto n = std::count_if(schedule.begin(), schedule.end(),
                                         [&](const training::ScheduledChunk& c) { return c.pool == label; });
            out << label << " " << n << " " << fixed(static_cast<double>(n) / static_cast<double>(n_chunks), 4)
                << "\n";
        }
        return 0;
    };

    // ---- train-config ----
    std::string preset_name = "ept", config_out;
    std::optional<std::uint64_t> lr_step;
    auto* train_cfg = app.add_subcommand("train-config", "emit a training preset");
    train_cfg->add_option("--preset", preset_name)->check(CLI::IsMember({"ept", "it"}));
    train_cfg->add_option("--out", config_out);
    train_cfg->add_option("--lr-at", lr_step, "print the learning rate at this step instead");
    actions[train_cfg] = [&] {
        const auto cfg = training::preset(preset_name);
        if (lr_step) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", training::lr_at(*lr_step, cfg));
            out << buf << "\n";
            return 0;
        }
        const auto text_out = training::emit_train_config(preset_name);
        if (config_out.empty()) {
            out << text_out;
        } else {
            text::write_file(ctx.output(config_out), text_out);
            out << "token budget " << training::token_budget(cfg) << "\n";
        }
        return 0;
    };

    // ---- testset ----
    auto* ts = app.add_subcommand("testset", "test-set curation")->require_subcommand(1);
    std::string set_arg, item_id, set_out;

    auto* ts_validate = ts->add_subcommand("validate", "check every item");
    ts_validate->add_option("--set", set_arg)->required();
    actions[ts_validate] = [&] {
        const auto items = testset::import_set(set_file(ctx, set_arg));
        std::size_t bad = 0;
        for (const auto& it : items) {
            for (const auto& v : testset::validate_item(it)) {
                out << testset::item_id(it) << "\t" << v.code << "\t" << v.detail << "\n";
                ++bad;
            }
        }
        const auto s = testset::summarize(items);
        out << "code_explanation " << s.code_explanation << "\nmultiple_choice " << s.multiple_choice
            << "\ndropped " << s.dropped << "\nviolations " << bad << "\n";
        return bad == 0 ? 0 : 1;
    };

    auto* ts_render = ts->add_subcommand("render", "print the prompt for one item");
    ts_render->add_option("--set", set_arg)->required();
    ts_render->add_option("--id", item_id)->required();
    actions[ts_render] = [&] {
        for (const auto& it : testset::import_set(set_file(ctx, set_arg))) {
            if (testset::item_id(it) == item_id) {
                out << testset::render_prompt(it);
                return 0;
            }
        }
        throw Error("UnknownItem", "no item '" + item_id + "'");
    };

    auto* ts_import = ts->add_subcommand("import", "normalize a test-set file into a set directory");
    ts_import->add_option("--in", set_arg)->required();
    ts_import->add_option("--out", set_out, "set directory")->required();
    actions[ts_import] = [&] {
        const auto items = testset::import_set(ctx.input(set_arg));
        const fs::path dir = ctx.output(set_out);
        fs::create_directories(dir);
        testset::export_set((dir / "testset.jsonl").string(), items);
        out << "imported " << items.size() << " items\n";
        return 0;
    };

    auto* ts_export = ts->add_subcommand("export", "write a set to one file");
    ts_export->add_option("--set", set_arg)->required();
    ts_export->add_option("--out", set_out)->required();
    actions[ts_export] = [&] {
        const auto items = testset::import_set(set_file(ctx, set_arg));
        testset::export_set(ctx.output(set_out), items);
        out << "exported " << items.size() << " items\n";
        return 0;
    };

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "run a model over a test set")->require_subcommand(1);
    BackendOptions model_opts, judge_opts;
    std::string model_id = "model", log_file;
    std::size_t beam_width = 0;

    auto* eval_ce = eval->add_subcommand("ce", "code explanation, scored by a judge model");
    eval_ce->add_option("--set", set_arg)->required();
    add_backend_flags(eval_ce, model_opts, "");
    add_backend_flags(eval_ce, judge_opts, "judge-");
    eval_ce->add_option("--model-id", model_id);
    eval_ce->add_option("--beam", beam_width, "beam width; greedy when omitted")->check(CLI::Range(1, 64));
    eval_ce->add_option("--log", log_file, "append verdicts to this JSON-lines file");
    actions[eval_ce] = [&] {
        const auto items = ce_items(testset::import_set(set_file(ctx, set_arg)));
        if (items.empty()) throw Error("EmptyInput", "no code-explanation items");
        auto model = make_backend(ctx, set_arg, model_opts, "model");
        auto judge = make_backend(ctx, set_arg, judge_opts, "judge");
        std::optional<judging::ResultLog> log;
        if (!log_file.empty()) log.emplace(ctx.output(log_file));
        const auto rid = run_id(ctx);
        double total = 0.0;
        for (const auto& item : items) {
            inference::GenerationRequest req;
            req.prompt = testset::render_prompt(item);
            if (beam_width > 0) req.mode = inference::DecodeMode::beam(beam_width);
            const auto explanation = model->generate(req);
            inference::GenerationRequest jreq;
            jreq.prompt = judging::build_judge_prompt(item.code, item.reference_explanation, explanation.text);
            const auto verdict = judging::parse_verdict(judge->generate(jreq).text, item.id, model_id);
            total += verdict.score;
            if (log) log->append(verdict, rid);
        }
        const double mean = total / static_cast<double>(items.size());
        out << "items " << items.size() << "\nmean judge score " << fixed(mean, 2) << "\npercent "
            << analytics::percent_score(mean) << "\n";
        return 0;
    };

    auto* eval_mc = eval->add_subcommand("mc", "multiple choice, graded against the answer key");
    eval_mc->add_option("--set", set_arg)->required();
    add_backend_flags(eval_mc, model_opts, "");
    eval_mc->add_option("--model-id", model_id);
    eval_mc->add_option("--log", log_file, "append graded results to this JSON-lines file");
    actions[eval_mc] = [&] {
        const auto items = mc_items(testset::import_set(set_file(ctx, set_arg)));
        auto model = make_backend(ctx, set_arg, model_opts, "model");
        std::optional<judging::ResultLog> log;
        if (!log_file.empty()) log.emplace(ctx.output(log_file));
        const auto rid = run_id(ctx);
        std::vector<judging::MCResult> results;
        for (const auto& item : items) {
            inference::GenerationRequest req;
            req.prompt = testset::render_prompt(item);
            req.max_new_tokens = 16;
            results.push_back(judging::grade_mc(model->generate(req).text, item, model_id));
            if (log) log->append(results.back(), rid);
        }
        const auto correct = std::count_if(results.begin(), results.end(), [](auto& r) { return r.correct; });
        const auto none = std::count_if(results.begin(), results.end(), [](auto& r) { return r.no_answer(); });
        out << "correct " << correct << "/" << results.size() << "\nno_answer " << none << "\naccuracy "
            << fixed(judging::mc_accuracy(results), 2) << "\n";
        return 0;
    };

    // ---- judge ----
    auto* judge_cmd = app.add_subcommand("judge", "judge prompt construction and verdict parsing")->require_subcommand(1);
    std::string code_file, reference_file, explanation_file, judge_output_file = "-";
    auto* judge_prompt = judge_cmd->add_subcommand("prompt", "print the rubric prompt");
    judge_prompt->add_option("--code", code_file)->required();
    judge_prompt->add_option("--reference", reference_file)->required();
    judge_prompt->add_option("--explanation", explanation_file)->required();
    actions[judge_prompt] = [&] {
        out << judging::build_judge_prompt(text::read_file(ctx.input(code_file)),
                                           text::read_file(ctx.input(reference_file)),
                                           text::read_file(ctx.input(explanation_file)));
        return 0;
    };
    auto* judge_parse = judge_cmd->add_subcommand("parse", "extract the score from a judge completion");
    judge_parse->add_option("--in", judge_output_file, "judge completion, - for stdin");
    actions[judge_parse] = [&] {
        std::string textin;
        if (judge_output_file == "-") {
            std::ostringstream ss;
            ss << std::cin.rdbuf();
            textin = ss.str();
        } else {
            textin = text::read_file(ctx.input(judge_output_file));
        }
        const auto v = judging::parse_verdict(textin, "", "");
        out << "score " << v.score << "\njustification_words " << judging::justification_word_count(v.justification)
            << "\n";
        return 0;
    };

    // ---- report ----
    std::string table_file, calibrate_rater, strategy = "affine_lsq", format = "text";
    auto* report = app.add_subcommand("report", "per-model scores, correlations and judge calibration");
    report->add_option("--table", table_file, "score table (JSON)")->required();
    report->add_option("--calibrate", calibrate_rater, "rater column to calibrate against the first column");
    report->add_option("--strategy", strategy)->check(CLI::IsMember({"affine_lsq", "anchor_endpoints", "zscore_match"}));
    report->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    actions[report] = [&] {
        const auto table = analytics::table_from_json(nlohmann::json::parse(text::read_file(ctx.input(table_file))));
        std::optional<std::string> rater;
        if (!calibrate_rater.empty()) rater = calibrate_rater;
        const auto rep = analytics::model_report(table, rater, analytics::parse_strategy(strategy));
        out << (format == "json" ? analytics::to_json(rep).dump(2) + "\n" : analytics::format_text(rep));
        return 0;
    };

    // ---- merge ----
    std::string ckpt_a, ckpt_b, ckpt_out;
    double merge_t = 0.5, merge_eps = 1e-7;
    std::vector<std::string> override_args;
    auto* merge_cmd = app.add_subcommand("merge", "SLERP-merge two compatible checkpoints");
    merge_cmd->add_option("--a", ckpt_a)->required();
    merge_cmd->add_option("--b", ckpt_b)->required();
    merge_cmd->add_option("--t", merge_t, "interpolation parameter")->required()->check(CLI::Range(0.0, 1.0));
    merge_cmd->add_option("--epsilon", merge_eps)->check(CLI::PositiveNumber);
    merge_cmd->add_option("--override", override_args, "tensor=t");
    merge_cmd->add_option("--out", ckpt_out)->required();
    actions[merge_cmd] = [&] {
        merge::MergeSpec spec;
        spec.t = merge_t;
        spec.epsilon = merge_eps;
        for (const auto& o : override_args) {
            auto [name, t] = split_assignment(o);
            spec.overrides[name] = to_double(t);
        }
        const auto a = merge::load_checkpoint(ctx.input(ckpt_a));
        const auto b = merge::load_checkpoint(ctx.input(ckpt_b));
        const auto result = merge::slerp_merge(a, b, spec);
        for (const auto& w : result.warnings) err << "warning: " << w << "\n";
        merge::save_checkpoint(result.merged, ctx.output(ckpt_out));
        out << "merged " << result.merged.entries.size() << " tensors\n";
        return 0;
    };

    // ---- beam-sweep ----
    std::vector<std::size_t> widths{1, 2, 3, 4, 5};
    std::optional<double> cal_slope, cal_intercept;
    std::size_t sweep_max_tokens = 0;
    auto* sweep = app.add_subcommand("beam-sweep", "judge-scored explanation quality per beam width");
    sweep->add_option("--set", set_arg)->required();
    add_backend_flags(sweep, model_opts, "");
    add_backend_flags(sweep, judge_opts, "judge-");
    sweep->add_option("--widths", widths)->delimiter(',')->check(CLI::Range(1, 64));
    sweep->add_option("--max-new-tokens", sweep_max_tokens);
    sweep->add_option("--slope", cal_slope, "calibration slope applied to mean judge scores");
    sweep->add_option("--intercept", cal_intercept, "calibration intercept");
    sweep->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    actions[sweep] = [&] {
        const auto items = ce_items(testset::import_set(set_file(ctx, set_arg)));
        auto model = make_backend(ctx, set_arg, model_opts, "model");
        auto judge = make_backend(ctx, set_arg, judge_opts, "judge");
        inference::SweepConfig cfg;
        cfg.widths = widths;
        if (sweep_max_tokens > 0) cfg.max_new_tokens = sweep_max_tokens;
        if (cal_slope || cal_intercept)
            cfg.calibration = analytics::CalibrationMap{analytics::CalibrationStrategy::affine_lsq,
                                                        cal_slope.value_or(1.0), cal_intercept.value_or(0.0)};
        const auto rows = inference::beam_sweep(*model, *judge, items, cfg);
        if (format == "json") {
            nlohmann::ordered_json j = nlohmann::ordered_json::array();
            for (const auto& r : rows)
                j.push_back({{"width", r.width},
                             {"items", r.items},
                             {"mean_judge_score", r.mean_judge_score},
                             {"normalized_score", r.normalized_score},
                             {"percent", r.percent}});
            out << j.dump(2) << "\n";
        } else {
            out << inference::format_sweep(rows);
        }
        return 0;
    };

    // ---- serve ----
    std::string host = "127.0.0.1", event_log = "eval-events.jsonl", assignments_file;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "run the rating and feedback service");
    serve->add_option("--host", host)->envname("VHDLX_HOST");
    serve->add_option("--port", port)->envname("VHDLX_PORT")->check(CLI::Range(1, 65535));
    serve->add_option("--log", event_log, "event log")->envname("VHDLX_EVENT_LOG");
    serve->add_option("--assignments", assignments_file, "rater assignments (JSON)")
        ->envname("VHDLX_ASSIGNMENTS")
        ->required();
    actions[serve] = [&] {
        eval_service::EvalStore store(ctx.output(event_log),
                                      eval_service::load_assignments(ctx.input(assignments_file)));
        eval_service::Server server(store);
        out << "listening on " << host << ":" << port << " (" << store.event_count() << " events replayed)"
            << std::endl;
        if (!server.listen(host, port)) throw Error("BindFailed", "cannot listen on " + host + ":" + std::to_string(port));
        return 0;
    };

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, out, err);
        return 2;
    }

    // The deepest parsed subcommand owns the action.
    CLI::App* leaf = &app;
    std::string command;
    while (true) {
        auto subs = leaf->get_subcommands();
        if (subs.empty()) break;
        leaf = subs.front();
        command += (command.empty() ? "" : " ") + leaf->get_name();
    }
    auto action = actions.find(leaf);
    if (action == actions.end()) {
        err << app.help();
        return 2;
    }

    int code = 0;
    try {
        code = action->second();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        code = 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: ParseError: " << e.what() << "\n";
        code = 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: IoError: " << e.what() << "\n";
        code = 1;
    }
    write_run_manifest(ctx, args, command, code);
    return code;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace vhdlx::cli
