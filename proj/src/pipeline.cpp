#include "glore/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "glore/analysis.hpp"
#include "glore/deppath.hpp"
#include "glore/downstream.hpp"
#include "glore/encoder.hpp"

namespace glore {

namespace fs = std::filesystem;

uint64_t effective_seed(const std::optional<uint64_t>& flag, uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GLORE_SEED")) {
    try {
      size_t used = 0;
      unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return static_cast<uint64_t>(v);
    } catch (const std::exception&) {
      throw Error(std::string("GLORE_SEED is not an integer: ") + env);
    }
  }
  return config_seed;
}

namespace {

std::vector<std::pair<std::string, std::string>> header_inputs(
    std::initializer_list<std::string> paths) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& p : paths) {
    if (!p.empty()) out.emplace_back(fs::path(p).filename().string(), p);
  }
  return out;
}

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string(what) + " not readable: " + path);
  return in;
}

std::vector<std::string> read_lines(const std::string& path, const char* what) {
  std::ifstream in = open_input(path, what);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    out.push_back(body);
  }
  return out;
}

Checkpoint load_checkpoint(const std::string& path) {
  return Checkpoint::from_json(read_file(path));
}

}  // namespace

ExtractCounts stage_extract(const std::string& corpus_path, const std::string& out_path,
                            uint64_t seed) {
  std::ifstream in = open_input(corpus_path, "corpus");
  std::vector<SentenceGraph> sentences = parse_conllu(in);
  std::string body = report_header(seed, header_inputs({corpus_path}));
  body += "#subject\trelation\tobject\tsentence\n";
  ExtractCounts counts;
  counts.sentences = static_cast<long long>(sentences.size());
  for (const SentenceGraph& s : sentences) {
    std::vector<ExtractedTriple> triples = extract_sentence_triples(s);
    counts.triples += static_cast<long long>(triples.size());
    for (const ExtractedTriple& t : triples) {
      body += t.subject + "\t" + t.rendered + "\t" + t.object + "\t" + t.sentence_id + "\n";
    }
  }
  atomic_write(out_path, body);
  return counts;
}

GraphCounts stage_build_graph(const std::string& triples_path, const std::string& kb_path,
                              const std::string& whitelist_path, FilterConfig filter,
                              const std::string& out_path, uint64_t seed) {
  std::ifstream tin = open_input(triples_path, "triples file");
  std::vector<CorpusTriple> triples = load_triples(tin);
  std::ifstream kin = open_input(kb_path, "KB file");
  KbStore kb = KbStore::load(kin);
  if (!whitelist_path.empty()) {
    for (const std::string& r : read_lines(whitelist_path, "whitelist")) {
      kb.relation_whitelist.insert(r);
    }
    filter.use_whitelist = true;
  }
  if (filter.use_whitelist && kb.relation_whitelist.empty()) {
    throw Error("whitelist filtering enabled but the whitelist is empty");
  }

  GraphCounts counts;
  CoocCounts cooc = align_corpus(triples, kb, filter, &counts.align);
  CoocCounts filtered = apply_filters(cooc, filter);
  NormalizeStats nstats;
  RelationGraph graph = normalize(filtered, &nstats);
  counts.dropped_zero = nstats.dropped_zero_rows;
  counts.rows = static_cast<long long>(graph.row_count());
  counts.edges = static_cast<long long>(graph.edge_count());
  counts.kb_relations = static_cast<long long>(graph.kb_vocab.size());
  if (counts.rows > 0) graph.validate();

  std::ostringstream out;
  save_graph(out, graph,
             report_header(seed, header_inputs({triples_path, kb_path, whitelist_path})));
  atomic_write(out_path, out.str());
  return counts;
}

TrainCounts stage_train(const std::string& graph_path, EncoderConfig enc, TrainConfig tc,
                        const std::string& glove_path, const std::string& ckpt_path,
                        const std::string& log_path, uint64_t seed) {
  std::ifstream gin = open_input(graph_path, "graph file");
  RelationGraph graph = load_graph(gin);
  if (graph.row_count() < 2) {
    throw Error("graph " + graph_path + " has fewer than 2 rows; cannot train");
  }
  tc.seed = seed;
  if (!glove_path.empty()) tc.pretrained_path = glove_path;
  auto [train_graph, val_graph] = split_train_validation(graph, tc.val_fraction, seed);
  // the vocabulary comes from the training split so validation measures
  // generalization to unseen textual relations
  Vocab vocab = build_vocab(train_graph);
  EncoderParams params = init_params(vocab, enc, static_cast<int>(graph.kb_vocab.size()), seed,
                                     tc.pretrained_path);
  TrainResult result = train(train_graph, val_graph, std::move(params), vocab, enc, tc);

  atomic_write(ckpt_path, result.best.to_json());
  if (!log_path.empty()) {
    std::string log = report_header(seed, header_inputs({graph_path}));
    log += "#epoch\ttrain_loss\tval_loss\n";
    for (const EpochLog& e : result.log) {
      log += std::to_string(e.epoch) + "\t" + fmt_g17(e.train_loss) + "\t" +
             fmt_g17(e.val_loss) + "\n";
    }
    atomic_write(log_path, log);
  }
  TrainCounts counts;
  counts.epochs = static_cast<int>(result.log.size());
  counts.best_epoch = result.best.epoch;
  counts.best_val = result.best.val_loss;
  counts.train_rows = static_cast<long long>(train_graph.row_count());
  counts.val_rows = static_cast<long long>(val_graph.row_count());
  return counts;
}

namespace {

std::vector<Prediction> make_predictions(
    const std::vector<Bag>& bags, const std::vector<std::string>& relations,
    const std::function<std::vector<double>(const Bag&)>& scorer) {
  std::vector<Prediction> out;
  for (const Bag& bag : bags) {
    std::vector<double> scores = scorer(bag);
    for (size_t j = 0; j < relations.size(); ++j) {
      out.push_back({bag.pair_id, relations[j], scores[j]});
    }
  }
  return out;
}

std::set<std::pair<std::string, std::string>> gold_facts(const std::vector<Bag>& bags,
                                                         const std::set<std::string>& targets) {
  std::set<std::pair<std::string, std::string>> out;
  for (const Bag& bag : bags) {
    for (const std::string& g : bag.gold) {
      if (targets.count(g)) out.insert({bag.pair_id, g});
    }
  }
  return out;
}

}  // namespace

ReResult stage_eval_re(const std::string& ckpt_path, const std::string& train_bags_path,
                       const std::string& eval_bags_path, const std::string& relations_path,
                       ReHeadConfig head_cfg, const std::vector<int>& cutoffs,
                       const std::string& alpha_spec, const std::string& out_path, uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  std::vector<std::string> relations = read_lines(relations_path, "relations file");
  if (relations.empty()) throw Error("relations file is empty: " + relations_path);
  std::set<std::string> target_set(relations.begin(), relations.end());

  std::ifstream tin = open_input(train_bags_path, "train bags");
  std::vector<Bag> train_bags = load_bags(tin);
  std::ifstream ein = open_input(eval_bags_path, "eval bags");
  std::vector<Bag> eval_bags = load_bags(ein);
  auto check_scores = [&](const std::vector<Bag>& bags, const char* what) {
    for (const Bag& b : bags) {
      if (!b.base_scores.empty() && b.base_scores.size() != relations.size()) {
        throw Error(std::string(what) + " bag " + b.pair_id + ": base score count " +
                    std::to_string(b.base_scores.size()) + " != relation count " +
                    std::to_string(relations.size()));
      }
    }
  };
  check_scores(train_bags, "train");
  check_scores(eval_bags, "eval");

  head_cfg.seed = seed;
  bool tune = alpha_spec == "auto";
  std::vector<Bag> head_bags = train_bags;
  std::vector<Bag> tune_bags;
  if (tune) {
    if (train_bags.size() < 5) throw Error("alpha tuning needs at least 5 training bags");
    std::vector<size_t> order(train_bags.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed ^ 0x5eedba95u);
    rng.shuffle(order);
    size_t tune_n = std::max<size_t>(1, train_bags.size() / 5);
    head_bags.clear();
    for (size_t i = 0; i < order.size(); ++i) {
      (i < tune_n ? tune_bags : head_bags).push_back(train_bags[order[i]]);
    }
    for (const Bag& b : tune_bags) {
      if (b.base_scores.empty()) {
        throw Error("alpha tuning requires base scores on every training bag");
      }
    }
  }

  ReHead head = train_re_head(head_bags, ckpt, relations, head_cfg);
  Embedder embedder(ckpt);
  auto emb_scorer = [&](const Bag& b) {
    return normalize_scores(re_head_scores(head, embed_pair(b, embedder, ckpt.config.max_len)));
  };
  auto base_scorer = [&](const Bag& b) { return normalize_scores(b.base_scores); };

  ReResult result;
  result.cutoffs = cutoffs;
  int mid_cutoff = cutoffs[cutoffs.size() / 2];

  if (tune) {
    auto tune_gold = gold_facts(tune_bags, target_set);
    if (tune_gold.empty()) throw Error("alpha tuning split has no gold facts");
    // a cutoff beyond the split's gold count cannot rank anything; fall back
    // to precision at the gold count
    int tune_cutoff = std::min(mid_cutoff, static_cast<int>(tune_gold.size()));
    double best_p = -1.0;
    for (int step = 0; step <= 20; ++step) {
      double alpha = step * 0.05;
      auto scorer = [&](const Bag& b) {
        return ensemble_scores(base_scorer(b), emb_scorer(b), alpha);
      };
      auto p = precision_at_n(make_predictions(tune_bags, relations, scorer), tune_gold,
                              {tune_cutoff});
      if (p[0] > best_p) {
        best_p = p[0];
        result.alpha = alpha;
      }
    }
  } else {
    try {
      result.alpha = std::stod(alpha_spec);
    } catch (const std::exception&) {
      throw Error("alpha must be \"auto\" or a number in [0,1], got \"" + alpha_spec + "\"");
    }
    if (result.alpha < 0.0 || result.alpha > 1.0) throw Error("alpha outside [0,1]");
  }

  bool eval_has_base = !eval_bags.empty();
  for (const Bag& b : eval_bags) {
    if (b.base_scores.empty()) eval_has_base = false;
  }
  auto eval_gold = gold_facts(eval_bags, target_set);
  result.emb = precision_at_n(make_predictions(eval_bags, relations, emb_scorer), eval_gold,
                              cutoffs);
  if (eval_has_base) {
    result.base = precision_at_n(make_predictions(eval_bags, relations, base_scorer), eval_gold,
                                 cutoffs);
    auto ens_scorer = [&](const Bag& b) {
      return ensemble_scores(base_scorer(b), emb_scorer(b), result.alpha);
    };
    result.ensemble = precision_at_n(make_predictions(eval_bags, relations, ens_scorer),
                                     eval_gold, cutoffs);
  }

  if (!out_path.empty()) {
    std::string body = report_header(
        seed, header_inputs({ckpt_path, train_bags_path, eval_bags_path, relations_path}));
    body += "#alpha\t" + fmt_g17(result.alpha) + "\n";
    body += "#cutoff\tbase\temb\tensemble\n";
    for (size_t i = 0; i < cutoffs.size(); ++i) {
      body += std::to_string(cutoffs[i]) + "\t";
      body += (eval_has_base ? fmt_fixed(result.base[i], 4) : std::string("-")) + "\t";
      body += fmt_fixed(result.emb[i], 4) + "\t";
      body += (eval_has_base ? fmt_fixed(result.ensemble[i], 4) : std::string("-")) + "\n";
    }
    atomic_write(out_path, body);
  }
  return result;
}

namespace {

std::string kbc_report_row(const std::string& name, const KbcReport& r) {
  auto cell = [](const KbcMetrics& m, bool hits) {
    if (m.count == 0) return std::string("-");
    return fmt_fixed(hits ? m.hits10 : m.mrr, 2);
  };
  return name + "\t" + cell(r.overall, false) + "\t" + cell(r.overall, true) + "\t" +
         cell(r.with_mentions, false) + "\t" + cell(r.with_mentions, true) + "\t" +
         cell(r.without_mentions, false) + "\t" + cell(r.without_mentions, true) + "\n";
}

// fixed-width table with overall / with-mentions / without-mentions columns
std::string kbc_table(const std::string& kind, const KbcStageResult& r) {
  auto pad = [](std::string s, size_t width) {
    if (s.size() < width) s.resize(width, ' ');
    return s;
  };
  auto cell = [&](const KbcMetrics& m, bool hits) {
    return pad(m.count == 0 ? "-" : fmt_fixed(hits ? m.hits10 : m.mrr, 2), 9);
  };
  std::string out;
  out += pad("model", 24) + pad("MRR", 9) + pad("HITS@10", 9) + pad("MRR(m)", 9) +
         pad("HITS(m)", 9) + pad("MRR(no m)", 10) + "HITS(no m)\n";
  auto row = [&](const std::string& name, const KbcReport& rep) {
    return pad(name, 24) + cell(rep.overall, false) + cell(rep.overall, true) +
           cell(rep.with_mentions, false) + cell(rep.with_mentions, true) +
           pad(rep.without_mentions.count == 0 ? "-" : fmt_fixed(rep.without_mentions.mrr, 2),
               10) +
           (rep.without_mentions.count == 0 ? "-" : fmt_fixed(rep.without_mentions.hits10, 2)) +
           "\n";
  };
  out += row(kind + " (KB only)", r.kb_only);
  if (r.has_emb) out += row("emb-" + kind, r.emb);
  return out;
}

}  // namespace

KbcStageResult stage_eval_kbc(const std::string& ckpt_path, const std::string& train_path,
                              const std::string& test_path, const std::string& mentions_path,
                              KbcConfig cfg, const std::string& out_path, uint64_t seed) {
  cfg.seed = seed;
  std::optional<Checkpoint> ckpt;
  if (!ckpt_path.empty()) ckpt = load_checkpoint(ckpt_path);

  std::ifstream tin = open_input(train_path, "kbc train file");
  std::ifstream sin = open_input(test_path, "kbc test file");
  std::optional<std::ifstream> min;
  if (!mentions_path.empty()) {
    if (!ckpt) throw Error("--mentions requires --checkpoint to embed textual relations");
    min.emplace(open_input(mentions_path, "kbc mentions file"));
  }
  KbcDataset dataset = load_kbc_dataset(tin, sin, min ? &*min : nullptr,
                                        ckpt ? &*ckpt : nullptr);

  KbcStageResult result;
  KbcConfig kb_only = cfg;
  kb_only.use_mentions = false;
  result.kb_only = evaluate_kbc(train_kbc(dataset, kb_only), dataset);
  if (!mentions_path.empty()) {
    KbcConfig with_emb = cfg;
    with_emb.use_mentions = true;
    result.emb = evaluate_kbc(train_kbc(dataset, with_emb), dataset);
    result.has_emb = true;
  }

  if (!out_path.empty()) {
    std::string body = report_header(
        seed, header_inputs({ckpt_path, train_path, test_path, mentions_path}));
    body += "#test_triples\toverall=" + std::to_string(result.kb_only.overall.count) +
            "\twith_mentions=" + std::to_string(result.kb_only.with_mentions.count) +
            "\twithout_mentions=" + std::to_string(result.kb_only.without_mentions.count) + "\n";
    body += "#model\tmrr\thits10\tmrr_with\thits10_with\tmrr_without\thits10_without\n";
    std::string kind = kbc_kind_name(cfg.kind);
    body += kbc_report_row(kind + " (KB only)", result.kb_only);
    if (result.has_emb) body += kbc_report_row("emb-" + kind, result.emb);
    atomic_write(out_path, body);
  }
  return result;
}

ExportCounts stage_export(const std::string& graph_path, const std::string& ckpt_path,
                          const std::string& embeddings_out, const std::string& labeled_out,
                          long long min_count, uint64_t seed) {
  std::ifstream gin = open_input(graph_path, "graph file");
  RelationGraph graph = load_graph(gin);
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ExportCounts counts;

  if (!embeddings_out.empty()) {
    std::ostringstream out;
    long skipped = 0;
    export_embeddings(graph.textual_vocab, ckpt, out,
                      report_header(seed, header_inputs({graph_path, ckpt_path})), &skipped);
    atomic_write(embeddings_out, out.str());
    counts.skipped = skipped;
    counts.embeddings = static_cast<long long>(graph.row_count()) - skipped;
  }

  if (!labeled_out.empty()) {
    auto labels = auto_label(graph);
    Embedder embedder(ckpt);
    std::vector<LabeledEmbedding> rows;
    for (size_t i = 0; i < graph.row_count(); ++i) {
      long long row_count = 0;
      for (const GraphEdge& e : graph.rows[i]) row_count += e.count;
      if (row_count < min_count) continue;  // infrequent relations stay out of the export
      const std::string& rendered = graph.textual_vocab[i];
      TextualRelation rel = parse_relation(rendered);
      if (relation_length(rel) > ckpt.config.max_len) {
        ++counts.skipped;
        continue;
      }
      const RowLabel& rl = labels.at(rendered);
      rows.push_back({rendered, rl.label, rl.dominant_weight, embedder.encode(rel)});
    }
    std::ostringstream out;
    write_labeled_embeddings(out, rows,
                             report_header(seed, header_inputs({graph_path, ckpt_path})));
    atomic_write(labeled_out, out.str());
    counts.labeled = static_cast<long long>(rows.size());
  }
  return counts;
}

std::string stage_nn(const std::string& table_path, const std::string& ckpt_path,
                     const std::string& query, int k) {
  std::ifstream tin = open_input(table_path, "embedding table");
  EmbeddingTable table = EmbeddingTable::load(tin);
  std::vector<double> qz;
  int idx = table.find(query);
  if (idx >= 0) {
    qz = table.vectors[idx];
  } else if (!ckpt_path.empty()) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Embedder embedder(ckpt);
    qz = embedder.encode(parse_relation(query));
  } else {
    throw Error("query is not in the table; pass --checkpoint to encode it");
  }
  return neighbor_report(nearest_neighbors(query, qz, table, k));
}

PipelineResult run_pipeline(const RunConfig& cfg, uint64_t seed, std::ostream& progress) {
  if (cfg.corpus.empty()) throw Error("pipeline config must set paths.corpus");
  if (cfg.kb.empty()) throw Error("pipeline config must set paths.kb");
  // every configured input must exist before any stage runs
  for (const std::string& path :
       {cfg.corpus, cfg.kb, cfg.whitelist, cfg.glove, cfg.re_train_bags, cfg.re_eval_bags,
        cfg.re_relations, cfg.kbc_train, cfg.kbc_test, cfg.kbc_mentions}) {
    if (!path.empty() && !fs::exists(path)) {
      throw Error("configured input path does not exist: " + path);
    }
  }
  fs::path out_dir(cfg.out_dir.empty() ? "out" : cfg.out_dir);
  auto in_out = [&](const char* name) { return (out_dir / name).string(); };

  std::vector<std::string> summary;
  auto note = [&](const std::string& stage, const std::string& key, const std::string& value) {
    summary.push_back(stage + "\t" + key + "\t" + value);
  };
  PipelineResult result;
  auto finish = [&]() {
    std::string body = report_header(seed, header_inputs({cfg.corpus, cfg.kb}));
    body += "#stage\tmetric\tvalue\n";
    for (const std::string& line : summary) body += line + "\n";
    atomic_write(in_out("summary.tsv"), body);
    result.summary = body;
    return result;
  };

  ExtractCounts ec = stage_extract(cfg.corpus, in_out("triples.tsv"), seed);
  progress << "[extract] sentences=" << ec.sentences << " triples=" << ec.triples << "\n";
  note("extract", "sentences", std::to_string(ec.sentences));
  note("extract", "triples", std::to_string(ec.triples));

  GraphCounts gc = stage_build_graph(in_out("triples.tsv"), cfg.kb, cfg.whitelist, cfg.filter,
                                     in_out("graph.tsv"), seed);
  progress << "[build-graph] rows=" << gc.rows << " edges=" << gc.edges
           << " kb_relations=" << gc.kb_relations << "\n";
  note("graph", "rows", std::to_string(gc.rows));
  note("graph", "edges", std::to_string(gc.edges));
  note("graph", "kb_relations", std::to_string(gc.kb_relations));
  if (gc.rows < 2) {
    result.stopped_early = true;
    result.stop_reason = gc.rows == 0 ? "no rows" : "too few rows";
    note("pipeline", "stopped", result.stop_reason);
    progress << "[pipeline] stopped: graph has " << gc.rows << " row(s)\n";
    return finish();
  }

  TrainCounts tc = stage_train(in_out("graph.tsv"), cfg.encoder, cfg.train, cfg.glove,
                               in_out("checkpoint.json"), in_out("loss_log.tsv"), seed);
  progress << "[train] epochs=" << tc.epochs << " best_epoch=" << tc.best_epoch
           << " best_val_loss=" << fmt_g17(tc.best_val) << "\n";
  note("train", "epochs", std::to_string(tc.epochs));
  note("train", "best_epoch", std::to_string(tc.best_epoch));
  note("train", "best_val_loss", fmt_g17(tc.best_val));
  note("train", "train_rows", std::to_string(tc.train_rows));
  note("train", "val_rows", std::to_string(tc.val_rows));

  ExportCounts xc = stage_export(in_out("graph.tsv"), in_out("checkpoint.json"),
                                 in_out("embeddings.tsv"), in_out("labeled_embeddings.tsv"),
                                 cfg.analysis_min_count, seed);
  progress << "[export] embeddings=" << xc.embeddings << " labeled=" << xc.labeled << "\n";
  note("export", "embeddings", std::to_string(xc.embeddings));
  note("export", "labeled", std::to_string(xc.labeled));

  if (!cfg.re_train_bags.empty() && !cfg.re_eval_bags.empty() && !cfg.re_relations.empty()) {
    ReResult re = stage_eval_re(in_out("checkpoint.json"), cfg.re_train_bags, cfg.re_eval_bags,
                                cfg.re_relations, cfg.re_head, cfg.re_cutoffs, cfg.re_alpha,
                                in_out("re_report.tsv"), seed);
    progress << "[eval-re] alpha=" << fmt_g17(re.alpha) << "\n";
    note("re", "alpha", fmt_g17(re.alpha));
    for (size_t i = 0; i < re.cutoffs.size(); ++i) {
      std::string n = std::to_string(re.cutoffs[i]);
      if (!re.base.empty()) note("re", "base_p@" + n, fmt_fixed(re.base[i], 4));
      note("re", "emb_p@" + n, fmt_fixed(re.emb[i], 4));
      if (!re.ensemble.empty()) note("re", "ensemble_p@" + n, fmt_fixed(re.ensemble[i], 4));
    }
  }

  if (!cfg.kbc_train.empty() && !cfg.kbc_test.empty()) {
    KbcStageResult kr = stage_eval_kbc(in_out("checkpoint.json"), cfg.kbc_train, cfg.kbc_test,
                                       cfg.kbc_mentions, cfg.kbc, in_out("kbc_report.tsv"), seed);
    progress << "[eval-kbc] kb_only_mrr=" << fmt_fixed(kr.kb_only.overall.mrr, 2);
    note("kbc", "kb_only_mrr", fmt_fixed(kr.kb_only.overall.mrr, 2));
    note("kbc", "kb_only_hits10", fmt_fixed(kr.kb_only.overall.hits10, 2));
    if (kr.has_emb) {
      progress << " emb_mrr=" << fmt_fixed(kr.emb.overall.mrr, 2);
      note("kbc", "emb_mrr", fmt_fixed(kr.emb.overall.mrr, 2));
      note("kbc", "emb_hits10", fmt_fixed(kr.emb.overall.hits10, 2));
    }
    progress << "\n";
  }

  return finish();
}

namespace {

struct CommonFlags {
  std::string config_path;
  long long seed_flag = -1;
  CLI::Option* seed_opt = nullptr;

  RunConfig load() const {
    return config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
  }
  uint64_t seed(const RunConfig& cfg) const {
    std::optional<uint64_t> flag;
    if (seed_opt && seed_opt->count()) flag = static_cast<uint64_t>(seed_flag);
    return effective_seed(flag, cfg.seed);
  }
};

void add_common(CLI::App* sc, CommonFlags& flags) {
  sc->add_option("--config", flags.config_path, "run configuration file");
  flags.seed_opt = sc->add_option("--seed", flags.seed_flag, "seed override");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"global textual relation embedding pipeline"};
  app.name("glore");
  app.require_subcommand(1);

  // ---- extract ----
  auto* sc_extract = app.add_subcommand("extract", "extract textual relations from parsed text");
  CommonFlags extract_common;
  add_common(sc_extract, extract_common);
  std::string extract_corpus, extract_out;
  sc_extract->add_option("--corpus", extract_corpus, "CoNLL-U style corpus with mentions");
  sc_extract->add_option("--out", extract_out, "output triples TSV");

  // ---- build-graph ----
  auto* sc_graph = app.add_subcommand("build-graph", "align triples with a KB and normalize");
  CommonFlags graph_common;
  add_common(sc_graph, graph_common);
  std::string graph_triples, graph_kb, graph_whitelist, graph_out;
  long long graph_max_len = 0, graph_min_occ = 0;
  bool graph_keep_symmetric = false;
  CLI::Option* o_gmax = sc_graph->add_option("--max-length", graph_max_len,
                                             "textual relation length cap (default 10)");
  CLI::Option* o_gmin = sc_graph->add_option("--min-count", graph_min_occ,
                                             "occurrence floor (default 2)");
  sc_graph->add_flag("--keep-symmetric", graph_keep_symmetric,
                     "keep symmetric textual relations");
  sc_graph->add_option("--triples", graph_triples, "extracted triples TSV");
  sc_graph->add_option("--kb", graph_kb, "KB triples TSV");
  sc_graph->add_option("--whitelist", graph_whitelist, "KB relation whitelist, one id per line");
  sc_graph->add_option("--out", graph_out, "output graph TSV");

  // ---- train ----
  auto* sc_train = app.add_subcommand("train", "train the relation embedding encoder");
  CommonFlags train_common;
  add_common(sc_train, train_common);
  std::string train_graph_path, train_ckpt, train_log, train_glove, train_encoder;
  long long t_dmodel = 0, t_layers = 0, t_heads = 0, t_ffn = 0, t_zdim = 0, t_maxlen = 0;
  long long t_epochs = 0, t_batch = 0, t_warmup = 0;
  double t_valfrac = 0.0, t_baselr = 0.0;
  sc_train->add_option("--graph", train_graph_path, "relation graph TSV");
  sc_train->add_option("--checkpoint-out", train_ckpt, "output checkpoint path");
  sc_train->add_option("--loss-log", train_log, "output per-epoch loss TSV");
  sc_train->add_option("--glove", train_glove, "pretrained word vectors");
  CLI::Option* o_enc = sc_train->add_option("--encoder", train_encoder,
                                            "encoder kind: transformer|recurrent");
  CLI::Option* o_dm = sc_train->add_option("--d-model", t_dmodel, "model width");
  CLI::Option* o_ly = sc_train->add_option("--layers", t_layers, "encoder layers");
  CLI::Option* o_hd = sc_train->add_option("--heads", t_heads, "attention heads");
  CLI::Option* o_ff = sc_train->add_option("--ffn", t_ffn, "feed-forward width");
  CLI::Option* o_zd = sc_train->add_option("--z-dim", t_zdim, "embedding dimension");
  CLI::Option* o_ml = sc_train->add_option("--max-len", t_maxlen, "maximum relation length");
  CLI::Option* o_ep = sc_train->add_option("--epochs", t_epochs, "maximum epochs");
  CLI::Option* o_bs = sc_train->add_option("--batch", t_batch, "batch size");
  CLI::Option* o_vf = sc_train->add_option("--val-fraction", t_valfrac, "validation fraction");
  CLI::Option* o_lr = sc_train->add_option("--base-lr", t_baselr, "base learning rate");
  CLI::Option* o_wu = sc_train->add_option("--warmup", t_warmup, "warmup steps");

  // ---- eval-re ----
  auto* sc_re = app.add_subcommand("eval-re", "relation extraction evaluation");
  CommonFlags re_common;
  add_common(sc_re, re_common);
  std::string re_ckpt, re_train_bags, re_eval_bags, re_relations, re_out, re_alpha, re_cutoffs;
  long long re_epochs = 0;
  double re_lr = 0.0;
  sc_re->add_option("--checkpoint", re_ckpt, "encoder checkpoint");
  sc_re->add_option("--train-bags", re_train_bags, "in-domain training bags TSV");
  sc_re->add_option("--eval-bags", re_eval_bags, "evaluation bags TSV");
  sc_re->add_option("--relations", re_relations, "target relation list, one per line");
  sc_re->add_option("--out", re_out, "output report TSV");
  CLI::Option* o_alpha = sc_re->add_option("--alpha", re_alpha, "ensemble weight or 'auto'");
  CLI::Option* o_cut = sc_re->add_option("--cutoffs", re_cutoffs, "comma-separated cutoffs");
  CLI::Option* o_repochs = sc_re->add_option("--epochs", re_epochs, "head training epochs");
  CLI::Option* o_relr = sc_re->add_option("--lr", re_lr, "head learning rate");

  // ---- eval-kbc ----
  auto* sc_kbc = app.add_subcommand("eval-kbc", "knowledge base completion evaluation");
  CommonFlags kbc_common;
  add_common(sc_kbc, kbc_common);
  std::string kbc_ckpt, kbc_train_path, kbc_test_path, kbc_mentions_path, kbc_out, kbc_kind;
  long long kbc_dim = 0, kbc_negatives = 0, kbc_epochs = 0, kbc_batch = 0;
  double kbc_lr = 0.0;
  sc_kbc->add_option("--checkpoint", kbc_ckpt, "encoder checkpoint (needed with --mentions)");
  sc_kbc->add_option("--train", kbc_train_path, "training triples TSV");
  sc_kbc->add_option("--test", kbc_test_path, "test triples TSV");
  sc_kbc->add_option("--mentions", kbc_mentions_path, "textual mention TSV");
  sc_kbc->add_option("--out", kbc_out, "output report TSV");
  CLI::Option* o_kind = sc_kbc->add_option("--kind", kbc_kind, "distmult|e|combined");
  CLI::Option* o_kdim = sc_kbc->add_option("--dim", kbc_dim, "latent dimension");
  CLI::Option* o_kneg = sc_kbc->add_option("--negatives", kbc_negatives, "negative samples");
  CLI::Option* o_kep = sc_kbc->add_option("--epochs", kbc_epochs, "training epochs");
  CLI::Option* o_kbs = sc_kbc->add_option("--batch", kbc_batch, "batch size");
  CLI::Option* o_klr = sc_kbc->add_option("--lr", kbc_lr, "learning rate");

  // ---- nn ----
  auto* sc_nn = app.add_subcommand("nn", "nearest neighbors of a textual relation");
  CommonFlags nn_common;
  add_common(sc_nn, nn_common);
  std::string nn_table, nn_ckpt, nn_query, nn_out;
  long long nn_k = 5;
  sc_nn->add_option("--embeddings", nn_table, "embedding table TSV");
  sc_nn->add_option("--checkpoint", nn_ckpt, "checkpoint for encoding unseen queries");
  sc_nn->add_option("--query", nn_query, "rendered textual relation");
  sc_nn->add_option("--k", nn_k, "neighbor count");
  sc_nn->add_option("--out", nn_out, "optional output report path");

  // ---- export ----
  auto* sc_export = app.add_subcommand("export", "export embeddings and labeled embeddings");
  CommonFlags export_common;
  add_common(sc_export, export_common);
  std::string export_graph, export_ckpt, export_emb, export_labeled;
  long long export_min_count = -1;
  sc_export->add_option("--graph", export_graph, "relation graph TSV");
  sc_export->add_option("--checkpoint", export_ckpt, "encoder checkpoint");
  sc_export->add_option("--embeddings-out", export_emb, "plain embedding table output");
  sc_export->add_option("--labeled-out", export_labeled, "labeled embedding output");
  CLI::Option* o_xmin = sc_export->add_option("--min-count", export_min_count,
                                              "frequency floor for the labeled export");

  // ---- pipeline ----
  auto* sc_pipe = app.add_subcommand("pipeline", "run every stage from one config");
  CommonFlags pipe_common;
  add_common(sc_pipe, pipe_common);
  std::string pipe_out_dir;
  sc_pipe->add_option("--out-dir", pipe_out_dir, "output directory override");

  std::vector<std::string> cli_args = args;
  std::vector<const char*> argv;
  argv.push_back("glore");
  for (const std::string& a : cli_args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (sc_extract->parsed()) {
      RunConfig cfg = extract_common.load();
      uint64_t seed = extract_common.seed(cfg);
      std::string corpus = extract_corpus.empty() ? cfg.corpus : extract_corpus;
      if (corpus.empty()) throw Error("no corpus given (--corpus or paths.corpus)");
      std::string out_path = extract_out.empty()
                                 ? (fs::path(cfg.out_dir) / "triples.tsv").string()
                                 : extract_out;
      ExtractCounts c = stage_extract(corpus, out_path, seed);
      out << "extracted " << c.triples << " triples from " << c.sentences << " sentences -> "
          << out_path << "\n";
    } else if (sc_graph->parsed()) {
      RunConfig cfg = graph_common.load();
      uint64_t seed = graph_common.seed(cfg);
      FilterConfig filter = cfg.filter;
      if (o_gmax->count()) filter.max_length = static_cast<int>(graph_max_len);
      if (o_gmin->count()) filter.min_occurrences = graph_min_occ;
      if (graph_keep_symmetric) filter.drop_symmetric = false;
      std::string triples = graph_triples.empty()
                                ? (fs::path(cfg.out_dir) / "triples.tsv").string()
                                : graph_triples;
      std::string kb = graph_kb.empty() ? cfg.kb : graph_kb;
      if (kb.empty()) throw Error("no KB given (--kb or paths.kb)");
      std::string wl = graph_whitelist.empty() ? cfg.whitelist : graph_whitelist;
      std::string out_path = graph_out.empty()
                                 ? (fs::path(cfg.out_dir) / "graph.tsv").string()
                                 : graph_out;
      GraphCounts c = stage_build_graph(triples, kb, wl, filter, out_path, seed);
      out << "graph: " << c.rows << " rows, " << c.edges << " edges, " << c.kb_relations
          << " KB relations -> " << out_path << "\n";
    } else if (sc_train->parsed()) {
      RunConfig cfg = train_common.load();
      uint64_t seed = train_common.seed(cfg);
      EncoderConfig enc = cfg.encoder;
      if (o_enc->count()) enc.kind = encoder_kind_from_name(train_encoder);
      if (o_dm->count()) enc.d_model = static_cast<int>(t_dmodel);
      if (o_ly->count()) enc.layer_count = static_cast<int>(t_layers);
      if (o_hd->count()) enc.head_count = static_cast<int>(t_heads);
      if (o_ff->count()) enc.ffn_dim = static_cast<int>(t_ffn);
      if (o_zd->count()) enc.z_dim = static_cast<int>(t_zdim);
      if (o_ml->count()) enc.max_len = static_cast<int>(t_maxlen);
      TrainConfig tc = cfg.train;
      if (o_ep->count()) tc.max_epochs = static_cast<int>(t_epochs);
      if (o_bs->count()) tc.batch_size = static_cast<int>(t_batch);
      if (o_vf->count()) tc.val_fraction = t_valfrac;
      if (o_lr->count()) tc.base_lr = t_baselr;
      if (o_wu->count()) tc.warmup_steps = static_cast<int>(t_warmup);
      std::string graph_path = train_graph_path.empty()
                                   ? (fs::path(cfg.out_dir) / "graph.tsv").string()
                                   : train_graph_path;
      std::string ckpt = train_ckpt.empty()
                             ? (fs::path(cfg.out_dir) / "checkpoint.json").string()
                             : train_ckpt;
      std::string log = train_log.empty()
                            ? (fs::path(cfg.out_dir) / "loss_log.tsv").string()
                            : train_log;
      std::string glove = train_glove.empty() ? cfg.glove : train_glove;
      TrainCounts c = stage_train(graph_path, enc, tc, glove, ckpt, log, seed);
      out << "trained " << c.epochs << " epochs; best epoch " << c.best_epoch
          << " val_loss " << fmt_g17(c.best_val) << " -> " << ckpt << "\n";
    } else if (sc_re->parsed()) {
      RunConfig cfg = re_common.load();
      uint64_t seed = re_common.seed(cfg);
      ReHeadConfig head = cfg.re_head;
      if (o_repochs->count()) head.epochs = static_cast<int>(re_epochs);
      if (o_relr->count()) head.lr = re_lr;
      std::vector<int> cutoffs = o_cut->count() ? parse_cutoffs(re_cutoffs) : cfg.re_cutoffs;
      std::string alpha = o_alpha->count() ? re_alpha : cfg.re_alpha;
      std::string ckpt = re_ckpt.empty()
                             ? (fs::path(cfg.out_dir) / "checkpoint.json").string()
                             : re_ckpt;
      std::string tb = re_train_bags.empty() ? cfg.re_train_bags : re_train_bags;
      std::string eb = re_eval_bags.empty() ? cfg.re_eval_bags : re_eval_bags;
      std::string rl = re_relations.empty() ? cfg.re_relations : re_relations;
      if (tb.empty() || eb.empty() || rl.empty()) {
        throw Error("eval-re needs --train-bags, --eval-bags and --relations");
      }
      std::string out_path = re_out.empty()
                                 ? (fs::path(cfg.out_dir) / "re_report.tsv").string()
                                 : re_out;
      ReResult r = stage_eval_re(ckpt, tb, eb, rl, head, cutoffs, alpha, out_path, seed);
      out << "eval-re alpha=" << fmt_g17(r.alpha) << " -> " << out_path << "\n";
      for (size_t i = 0; i < r.cutoffs.size(); ++i) {
        out << "P@" << r.cutoffs[i];
        if (!r.base.empty()) out << " base=" << fmt_fixed(r.base[i], 4);
        out << " emb=" << fmt_fixed(r.emb[i], 4);
        if (!r.ensemble.empty()) out << " ensemble=" << fmt_fixed(r.ensemble[i], 4);
        out << "\n";
      }
    } else if (sc_kbc->parsed()) {
      RunConfig cfg = kbc_common.load();
      uint64_t seed = kbc_common.seed(cfg);
      KbcConfig kc = cfg.kbc;
      if (o_kind->count()) kc.kind = kbc_kind_from_name(kbc_kind);
      if (o_kdim->count()) kc.dim = static_cast<int>(kbc_dim);
      if (o_kneg->count()) kc.negatives = static_cast<int>(kbc_negatives);
      if (o_kep->count()) kc.epochs = static_cast<int>(kbc_epochs);
      if (o_kbs->count()) kc.batch_size = static_cast<int>(kbc_batch);
      if (o_klr->count()) kc.lr = kbc_lr;
      std::string tr = kbc_train_path.empty() ? cfg.kbc_train : kbc_train_path;
      std::string te = kbc_test_path.empty() ? cfg.kbc_test : kbc_test_path;
      if (tr.empty() || te.empty()) throw Error("eval-kbc needs --train and --test");
      std::string me = kbc_mentions_path.empty() ? cfg.kbc_mentions : kbc_mentions_path;
      std::string ck = kbc_ckpt;
      if (ck.empty() && !me.empty()) {
        ck = (fs::path(cfg.out_dir) / "checkpoint.json").string();
      }
      std::string out_path = kbc_out.empty()
                                 ? (fs::path(cfg.out_dir) / "kbc_report.tsv").string()
                                 : kbc_out;
      KbcStageResult r = stage_eval_kbc(ck, tr, te, me, kc, out_path, seed);
      out << kbc_table(kbc_kind_name(kc.kind), r);
      out << "report -> " << out_path << "\n";
    } else if (sc_nn->parsed()) {
      RunConfig cfg = nn_common.load();
      uint64_t seed = nn_common.seed(cfg);
      if (nn_query.empty()) throw Error("nn needs --query");
      std::string table = nn_table.empty()
                              ? (fs::path(cfg.out_dir) / "embeddings.tsv").string()
                              : nn_table;
      std::string report = stage_nn(table, nn_ckpt, nn_query, static_cast<int>(nn_k));
      if (!nn_out.empty()) {
        std::string body = report_header(seed, header_inputs({table})) + report;
        atomic_write(nn_out, body);
        out << "report -> " << nn_out << "\n";
      } else {
        out << report;
      }
    } else if (sc_export->parsed()) {
      RunConfig cfg = export_common.load();
      uint64_t seed = export_common.seed(cfg);
      long long min_count = o_xmin->count() ? export_min_count : cfg.analysis_min_count;
      std::string graph_path = export_graph.empty()
                                   ? (fs::path(cfg.out_dir) / "graph.tsv").string()
                                   : export_graph;
      std::string ckpt = export_ckpt.empty()
                             ? (fs::path(cfg.out_dir) / "checkpoint.json").string()
                             : export_ckpt;
      std::string emb_out = export_emb;
      std::string lab_out = export_labeled;
      if (emb_out.empty() && lab_out.empty()) {
        emb_out = (fs::path(cfg.out_dir) / "embeddings.tsv").string();
        lab_out = (fs::path(cfg.out_dir) / "labeled_embeddings.tsv").string();
      }
      ExportCounts c = stage_export(graph_path, ckpt, emb_out, lab_out, min_count, seed);
      out << "exported " << c.embeddings << " embeddings, " << c.labeled << " labeled rows ("
          << c.skipped << " skipped)\n";
    } else if (sc_pipe->parsed()) {
      if (pipe_common.config_path.empty()) throw Error("pipeline needs --config");
      RunConfig cfg = pipe_common.load();
      if (!pipe_out_dir.empty()) cfg.out_dir = pipe_out_dir;
      uint64_t seed = pipe_common.seed(cfg);
      cfg.train.seed = seed;
      cfg.re_head.seed = seed;
      cfg.kbc.seed = seed;
      PipelineResult r = run_pipeline(cfg, seed, out);
      out << (r.stopped_early ? "pipeline stopped early: " + r.stop_reason : "pipeline complete")
          << "; summary -> " << (fs::path(cfg.out_dir) / "summary.tsv").string() << "\n";
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace glore
