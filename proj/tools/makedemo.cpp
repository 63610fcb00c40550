// Generates the bundled synthetic demo: a small parsed corpus with entity
// mentions, a matching KB, relation-extraction bags with noisy base scores,
// and a KB-completion split with textual mentions. Everything is seeded, so
// regenerating produces identical files.

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glore/deppath.hpp"
#include "glore/relgraph.hpp"
#include "glore/util.hpp"

using namespace glore;

namespace {

struct Tok {
  std::string surface;  // "$1" / "$2" mark the mention slots
  int head;
  std::string deprel;
};

struct Template {
  std::string kb_relation;
  bool subject_is_m1;  // KB fact direction relative to the two slots
  std::vector<Tok> toks;
};

std::vector<Template> sentence_templates() {
  return {
      // $1 founded $2 .            fact: ($2, founder, $1)
      {"founder", false,
       {{"$1", 2, "nsubj"}, {"founded", 0, "root"}, {"$2", 2, "dobj"}, {".", 2, "punct"}}},
      // $1 was founded by $2 .     fact: ($1, founder, $2)
      {"founder", true,
       {{"$1", 3, "nsubjpass"},
        {"was", 3, "auxpass"},
        {"founded", 0, "root"},
        {"by", 5, "case"},
        {"$2", 3, "nmod"},
        {".", 3, "punct"}}},
      // $1 leads $2 .              fact: ($1, ceo_of, $2)
      {"ceo_of", true,
       {{"$1", 2, "nsubj"}, {"leads", 0, "root"}, {"$2", 2, "dobj"}, {".", 2, "punct"}}},
      // $1 is the chief of $2 .    fact: ($1, ceo_of, $2)
      {"ceo_of", true,
       {{"$1", 4, "nsubj"},
        {"is", 4, "cop"},
        {"the", 4, "det"},
        {"chief", 0, "root"},
        {"of", 6, "case"},
        {"$2", 4, "nmod"},
        {".", 4, "punct"}}},
      // $1 was born in $2 .        fact: ($1, born_in, $2)
      {"born_in", true,
       {{"$1", 3, "nsubjpass"},
        {"was", 3, "auxpass"},
        {"born", 0, "root"},
        {"in", 5, "case"},
        {"$2", 3, "nmod"},
        {".", 3, "punct"}}},
      // $1 is the capital of $2 .  fact: ($1, capital_of, $2)
      {"capital_of", true,
       {{"$1", 4, "nsubj"},
        {"is", 4, "cop"},
        {"the", 4, "det"},
        {"capital", 0, "root"},
        {"of", 6, "case"},
        {"$2", 4, "nmod"},
        {".", 4, "punct"}}},
      // $1 wrote $2 .              fact: ($1, author_of, $2)
      {"author_of", true,
       {{"$1", 2, "nsubj"}, {"wrote", 0, "root"}, {"$2", 2, "dobj"}, {".", 2, "punct"}}},
      // $1 was written by $2 .     fact: ($2, author_of, $1)
      {"author_of", false,
       {{"$1", 3, "nsubjpass"},
        {"was", 3, "auxpass"},
        {"written", 0, "root"},
        {"by", 5, "case"},
        {"$2", 3, "nmod"},
        {".", 3, "punct"}}},
  };
}

std::string conllu_block(const Template& tpl, const std::string& m1, const std::string& m2) {
  std::ostringstream out;
  int index = 0;
  int m1_pos = 0, m2_pos = 0;
  for (const Tok& t : tpl.toks) {
    ++index;
    std::string surface = t.surface;
    if (surface == "$1") {
      surface = m1;
      m1_pos = index;
    } else if (surface == "$2") {
      surface = m2;
      m2_pos = index;
    }
    out << index << '\t' << surface << "\t_\t_\t_\t_\t" << t.head << '\t' << t.deprel
        << "\t_\t_\n";
  }
  out << "#MENTION\t" << m1_pos << '\t' << m1_pos << '\t' << m1 << '\n';
  out << "#MENTION\t" << m2_pos << '\t' << m2_pos << '\t' << m2 << '\n';
  out << '\n';
  return out.str();
}

// Rendered path from the fact subject to the fact object for one template.
std::string rendered_for(const Template& tpl) {
  std::istringstream block(conllu_block(tpl, "sub_ent", "obj_ent"));
  std::vector<SentenceGraph> parsed = parse_conllu(block);
  const SentenceGraph& s = parsed.at(0);
  const EntityMention& m1 = s.mentions[0].entity_id == "sub_ent" ? s.mentions[0] : s.mentions[1];
  const EntityMention& m2 = s.mentions[0].entity_id == "sub_ent" ? s.mentions[1] : s.mentions[0];
  const EntityMention& from = tpl.subject_is_m1 ? m1 : m2;
  const EntityMention& to = tpl.subject_is_m1 ? m2 : m1;
  auto path = extract_path(s, from, to);
  if (!path) throw Error("template path blocked unexpectedly");
  return render_relation(*path);
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = "demo";
  if (argc > 1) out_dir = argv[1];
  std::filesystem::create_directories(out_dir);
  auto path = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };

  Rng rng(7);

  std::vector<std::string> people = {"ada_lovelace", "alan_turing", "grace_hopper", "henry_ford",
                                     "karl_benz",    "marie_curie", "rosa_parks",   "lise_meitner",
                                     "mary_shelley", "isaac_asimov", "jane_austen", "mark_twain"};
  std::vector<std::string> companies = {"ford_motor", "benz_works", "acme_corp", "globex",
                                        "initech",    "stark_labs", "wayne_corp", "tyrell_inc"};
  std::vector<std::string> cities = {"london", "paris",  "berlin", "madrid",
                                     "vienna", "prague", "lisbon", "dublin"};
  std::vector<std::string> countries = {"england", "france",  "germany",  "spain",
                                        "austria", "czechia", "portugal", "ireland"};
  std::vector<std::string> books = {"frankenstein", "foundation", "emma",
                                    "persuasion",   "tom_sawyer", "huck_finn"};

  // ---- KB facts ----
  std::vector<KbTriple> facts;
  for (int i = 0; i < 8; ++i) facts.push_back({companies[i], "founder", people[i]});
  for (int i = 0; i < 8; ++i) facts.push_back({people[(i + 4) % 12], "ceo_of", companies[i]});
  for (int i = 0; i < 12; ++i) facts.push_back({people[i], "born_in", cities[i % 8]});
  for (int i = 0; i < 8; ++i) facts.push_back({cities[i], "capital_of", countries[i]});
  facts.push_back({"mary_shelley", "author_of", "frankenstein"});
  facts.push_back({"isaac_asimov", "author_of", "foundation"});
  facts.push_back({"jane_austen", "author_of", "emma"});
  facts.push_back({"jane_austen", "author_of", "persuasion"});
  facts.push_back({"mark_twain", "author_of", "tom_sawyer"});
  facts.push_back({"mark_twain", "author_of", "huck_finn"});

  std::string kb_tsv;
  for (const KbTriple& f : facts) {
    kb_tsv += f.subject + "\t" + f.relation + "\t" + f.object + "\n";
  }
  atomic_write(path("kb.tsv"), kb_tsv);

  // ---- corpus ----
  std::vector<Template> templates = sentence_templates();
  std::map<std::string, std::vector<const Template*>> by_relation;
  for (const Template& t : templates) by_relation[t.kb_relation].push_back(&t);

  std::string corpus;
  int sentences = 0;
  for (const KbTriple& fact : facts) {
    for (const Template* tpl : by_relation[fact.relation]) {
      int repeats = 2 + static_cast<int>(rng.index(2));
      for (int rep = 0; rep < repeats; ++rep) {
        const std::string& m1 = tpl->subject_is_m1 ? fact.subject : fact.object;
        const std::string& m2 = tpl->subject_is_m1 ? fact.object : fact.subject;
        corpus += conllu_block(*tpl, m1, m2);
        ++sentences;
      }
    }
  }
  // distractor pairs with no KB fact
  for (int i = 0; i < 10; ++i) {
    const Template& tpl = templates[rng.index(templates.size())];
    corpus += conllu_block(tpl, people[rng.index(people.size())],
                           cities[rng.index(cities.size())]);
    ++sentences;
  }
  // symmetric pattern, filtered out downstream
  for (int i = 0; i < 4; ++i) {
    std::ostringstream block;
    std::string a = people[rng.index(people.size())];
    std::string b = people[rng.index(people.size())];
    if (a == b) b = people[(rng.index(people.size()) + 1) % people.size()];
    block << "1\t" << a << "\t_\t_\t_\t_\t3\tnsubj\t_\t_\n";
    block << "2\t" << b << "\t_\t_\t_\t_\t3\tnsubj\t_\t_\n";
    block << "3\tmet\t_\t_\t_\t_\t0\troot\t_\t_\n";
    block << "#MENTION\t1\t1\t" << a << "\n#MENTION\t2\t2\t" << b << "\n\n";
    corpus += block.str();
    ++sentences;
  }
  atomic_write(path("corpus.conllu"), corpus);

  // ---- relation-extraction bags ----
  std::vector<std::string> relations;
  for (const auto& [name, tpls] : by_relation) {
    (void)tpls;
    relations.push_back(name);
  }
  std::string rel_list;
  for (const std::string& r : relations) rel_list += r + "\n";
  atomic_write(path("re_relations.txt"), rel_list);

  std::map<std::string, int> rel_index;
  for (size_t i = 0; i < relations.size(); ++i) rel_index[relations[i]] = static_cast<int>(i);

  // bags are independent in-domain data over synthetic pairs; the textual
  // relations reuse the corpus templates so the checkpoint can encode them
  std::string train_bags, eval_bags;
  for (int bag_id = 0; bag_id < 120; ++bag_id) {
    const std::string& gold_rel = relations[rng.index(relations.size())];
    std::vector<std::string> rendered;
    for (const Template* tpl : by_relation[gold_rel]) rendered.push_back(rendered_for(*tpl));
    if (rendered.size() > 1 && rng.uniform() < 0.4) rendered.resize(1);
    // noisy base model: right 70% of the time
    int base_pick = rel_index[gold_rel];
    if (rng.uniform() > 0.7) {
      base_pick = static_cast<int>(rng.index(relations.size()));
    }
    std::vector<double> base(relations.size(), 0.05);
    base[base_pick] += 1.0 + rng.uniform() * 0.2;
    std::string base_csv;
    for (size_t i = 0; i < base.size(); ++i) {
      if (i) base_csv += ",";
      base_csv += fmt_g17(base[i]);
    }
    std::string id = "pe" + std::to_string(bag_id);
    std::string line = id + "\t" + id + "_s\t" + id + "_o\t" + gold_rel + "\t" +
                       join(rendered, "||") + "\t" + base_csv + "\n";
    (bag_id % 5 < 3 ? train_bags : eval_bags) += line;
  }
  atomic_write(path("re_train_bags.tsv"), train_bags);
  atomic_write(path("re_eval_bags.tsv"), eval_bags);

  // ---- KB completion split ----
  std::string kbc_train, kbc_test, kbc_mentions;
  for (const KbTriple& fact : facts) {
    bool held_out = rng.uniform() < 0.3;
    std::string line = fact.subject + "\t" + fact.relation + "\t" + fact.object + "\n";
    (held_out ? kbc_test : kbc_train) += line;
    if (rng.uniform() < 0.6) {
      for (const Template* tpl : by_relation[fact.relation]) {
        kbc_mentions += fact.subject + "\t" + fact.object + "\t" + rendered_for(*tpl) + "\n";
        break;
      }
    }
  }
  atomic_write(path("kbc_train.tsv"), kbc_train);
  atomic_write(path("kbc_test.tsv"), kbc_test);
  atomic_write(path("kbc_mentions.tsv"), kbc_mentions);

  // ---- run configuration ----
  std::string cfg =
      "seed=42\n"
      "paths.corpus=corpus.conllu\n"
      "paths.kb=kb.tsv\n"
      "paths.out_dir=out\n"
      "paths.re_train_bags=re_train_bags.tsv\n"
      "paths.re_eval_bags=re_eval_bags.tsv\n"
      "paths.re_relations=re_relations.txt\n"
      "paths.kbc_train=kbc_train.tsv\n"
      "paths.kbc_test=kbc_test.tsv\n"
      "paths.kbc_mentions=kbc_mentions.tsv\n"
      "filter.max_length=10\n"
      "filter.min_occurrences=2\n"
      "filter.drop_symmetric=true\n"
      "encoder.kind=transformer\n"
      "encoder.d_model=24\n"
      "encoder.layers=2\n"
      "encoder.heads=2\n"
      "encoder.ffn_dim=48\n"
      "encoder.z_dim=16\n"
      "encoder.max_len=12\n"
      "train.max_epochs=40\n"
      "train.batch_size=4\n"
      "train.val_fraction=0.1\n"
      "train.base_lr=1.0\n"
      "train.warmup_steps=20\n"
      "re.epochs=150\n"
      "re.lr=0.05\n"
      "re.cutoffs=10,20,40\n"
      "re.alpha=auto\n"
      "kbc.kind=distmult\n"
      "kbc.dim=16\n"
      "kbc.negatives=20\n"
      "kbc.epochs=30\n"
      "kbc.batch_size=8\n"
      "kbc.lr=0.05\n"
      "analysis.min_count=2\n";
  atomic_write(path("demo.cfg"), cfg);

  std::cout << "demo written to " << out_dir << " (" << sentences << " sentences, "
            << facts.size() << " KB facts)\n";
  return 0;
}
