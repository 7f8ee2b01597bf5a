#include "elkb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "elkb/dense.hpp"
#include "elkb/errors.hpp"
#include "elkb/ingest.hpp"
#include "elkb/text.hpp"
#include "nlohmann/json.hpp"

namespace elkb::synth {

namespace {

const std::vector<std::string> kRoots = {
    "acme",   "zenith", "nimbus",  "vertex", "quantus", "apexo",   "cobalt",
    "orbita", "pulsar", "vistara", "novus",  "lumen",   "cascade", "pinnacle",
    "sierra", "atlasa", "beacon",  "cipher", "deltic",  "embero",  "falcon",
    "garnet", "harbor", "ionix",   "jasper", "krypton", "lattice", "meridian",
    "nectar", "onyxo",  "prisma",  "quartz", "ravena",  "summit",  "titanus",
    "umbra",  "vortex", "willow",  "xenon",  "yonder",  "zephyr",  "mosaic",
};

const std::vector<std::string> kSuffixes = {
    "systems",   "labs",         "platform", "solutions", "analytics", "software",
    "networks",  "dynamics",     "industries", "technologies", "group",  "holdings",
    "digital",   "cloud",        "media",    "works",     "studio",    "suite",
    "logistics", "capital",      "partners", "ventures",  "global",    "services",
};

const std::vector<std::string> kContextWords = {
    "billing",     "invoice",    "subscription", "renewal",    "account",
    "support",     "ticket",     "upgrade",      "license",    "deployment",
    "migration",   "dashboard",  "integration",  "workflow",   "pipeline",
    "storage",     "compute",    "database",     "cluster",    "latency",
    "outage",      "incident",   "rollout",      "release",    "onboarding",
    "training",    "contract",   "pricing",      "discount",   "quota",
    "bandwidth",   "telemetry",  "monitoring",   "alerting",   "backup",
    "restore",     "encryption", "compliance",   "audit",      "inventory",
    "shipment",    "warehouse",  "vendor",       "procurement", "payroll",
    "expense",     "budget",     "forecast",     "revenue",    "churn",
    "retention",   "conversion", "campaign",     "newsletter", "webinar",
    "roadmap",     "sprint",     "backlog",      "standup",    "review",
    "feedback",    "survey",     "escalation",   "resolution", "downtime",
    "maintenance", "patching",   "firmware",     "gateway",    "router",
    "firewall",    "endpoint",   "session",      "token",      "login",
    "password",    "profile",    "notification", "digest",     "archive",
};

using Rng = std::mt19937_64;

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  std::uniform_int_distribution<size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

std::string sample_words(const std::vector<std::string>& pool, size_t n, Rng& rng,
                         std::vector<std::string>* out_words = nullptr) {
  std::string text;
  for (size_t i = 0; i < n; ++i) {
    const std::string& w = pick(pool, rng);
    if (i) text.push_back(' ');
    text += w;
    if (out_words) out_words->push_back(w);
  }
  return text;
}

std::vector<float> random_unit_vector(uint32_t dim, Rng& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = d(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (uint32_t i = 0; i < dim; ++i)
    out[i] = norm > 0.0 ? static_cast<float>(v[i] / norm) : 0.0f;
  return out;
}

std::string url_for(const std::string& title, size_t index) {
  std::string slug = title;
  for (auto& c : slug)
    if (c == ' ') c = '_';
  return "https://en.wikipedia.org/wiki/" + slug + "_(" + std::to_string(index) + ")";
}

std::string qid_for(size_t index) { return "Q" + std::to_string(100000 + index); }

struct UtteranceParts {
  std::string prefix;   // text before the mention surface
  std::string suffix;   // text after, with {0}..{3} already substituted
};

// A few sentence shapes; c0..c3 come from the gold entity's description.
std::string make_utterance(size_t variant, const std::string& surface,
                           const std::vector<std::string>& ctx, size_t* start_cp,
                           size_t* end_cp) {
  const std::string& c0 = ctx[0 % ctx.size()];
  const std::string& c1 = ctx[1 % ctx.size()];
  const std::string& c2 = ctx[2 % ctx.size()];
  std::string prefix, suffix;
  switch (variant % 4) {
    case 0:
      prefix = "we talked about the ";
      suffix = " " + c0 + " " + c1 + " issue during the " + c2 + " call";
      break;
    case 1:
      prefix = "our ";
      suffix = " " + c0 + " renewal covers " + c1 + " and " + c2 + " for the team";
      break;
    case 2:
      prefix = "can you check the ";
      suffix = " " + c0 + " " + c1 + " dashboard before the " + c2 + " review";
      break;
    default:
      prefix = "the ";
      suffix = " rollout blocked " + c0 + " " + c1 + " until the " + c2 + " step finished";
      break;
  }
  *start_cp = codepoint_length(prefix);
  *end_cp = *start_cp + codepoint_length(surface);
  return prefix + surface + suffix;
}

void assign_ids(Benchmark& bm) {
  for (auto& e : bm.entities) e.entity_id = stable_entity_id(e.wikipedia_url);
}

std::string alias_label(const SynthEntity& e) {
  for (const auto& t : e.instance_of)
    if (t == "product" || t == "organization") return t;
  return "unknown";
}

}  // namespace

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  if (spec.n_gold + spec.crowded_past_100 + spec.crowded_past_250 > spec.n_entities)
    throw ValidationError("benchmark spec: gold rows exceed entity budget");

  Benchmark bm;
  bm.dim = spec.dim;
  Rng rng(spec.seed);
  StubEncoder encoder(spec.dim, spec.encoder_seed);
  size_t counter = 0;

  auto add_entity = [&](SynthEntity e) -> size_t {
    bm.entities.push_back(std::move(e));
    return bm.entities.size() - 1;
  };

  auto plant_gold = [&](size_t entity_index, const std::string& surface, size_t variant) {
    SynthEntity& e = bm.entities[entity_index];
    std::vector<std::string> ctx;
    for (const auto& t : tokenize(e.description)) {
      ctx.push_back(t.text);
      if (ctx.size() == 4) break;
    }
    if (ctx.empty()) ctx.push_back("billing");
    GoldUtterance g;
    g.text = make_utterance(variant, surface, ctx, &g.start, &g.end);
    g.qid = e.qid;
    e.embedding = encoder.encode(g.text, g.start, g.end);
    bm.gold.push_back(std::move(g));
    bm.aliases.emplace_back(surface, alias_label(e));
  };

  // Regular gold entities: unique mention token, strong lexical rank.
  for (size_t i = 0; i < spec.n_gold; ++i) {
    std::string m = kRoots[i % kRoots.size()] + std::to_string(counter++);
    SynthEntity e;
    std::string suffix = pick(kSuffixes, rng);
    e.title = m + " " + suffix;
    e.description = sample_words(kContextWords, 10, rng);
    e.wikipedia_url = url_for(e.title, bm.entities.size());
    e.qid = qid_for(bm.entities.size());
    e.instance_of = {i % 2 == 0 ? "product" : "organization"};
    e.embedding = random_unit_vector(spec.dim, rng);
    size_t idx = add_entity(std::move(e));
    // Half the mentions span just the token, half the two-token title phrase.
    std::string surface = (i % 2 == 0) ? m : m + " " + suffix;
    plant_gold(idx, surface, i);
  }

  // Crowded gold entities: n_decoys short-titled entities share the mention
  // token and tie above the gold, pinning its lexical rank at n_decoys + 1.
  auto add_crowded = [&](size_t n_rows, size_t n_decoys) {
    for (size_t i = 0; i < n_rows; ++i) {
      std::string m = kRoots[(i * 7 + 3) % kRoots.size()] + std::to_string(counter++);
      SynthEntity gold;
      gold.title = m + " " + pick(kSuffixes, rng) + " " + pick(kSuffixes, rng) + " " +
                   pick(kSuffixes, rng) + " " + pick(kSuffixes, rng);
      gold.description = sample_words(kContextWords, 10, rng);
      gold.wikipedia_url = url_for(gold.title, bm.entities.size());
      gold.qid = qid_for(bm.entities.size());
      gold.instance_of = {"product"};
      gold.embedding = random_unit_vector(spec.dim, rng);
      size_t idx = add_entity(std::move(gold));
      for (size_t j = 0; j < n_decoys; ++j) {
        SynthEntity decoy;
        decoy.title = m + " node" + std::to_string(j);
        decoy.description = sample_words(kContextWords, 8, rng);
        decoy.wikipedia_url = url_for(decoy.title, bm.entities.size());
        decoy.qid = qid_for(bm.entities.size());
        decoy.instance_of = {"organization"};
        decoy.embedding = random_unit_vector(spec.dim, rng);
        add_entity(std::move(decoy));
      }
      plant_gold(idx, m, i);
    }
  };
  add_crowded(spec.crowded_past_100, 130);
  add_crowded(spec.crowded_past_250, 300);

  // Fillers: overlapping 1-2 root + suffix names, shared description
  // vocabulary; they never contain a gold mention token.
  while (bm.entities.size() < spec.n_entities) {
    SynthEntity e;
    std::uniform_int_distribution<int> d2(0, 2);
    int extra = d2(rng);
    e.title = pick(kRoots, rng);
    if (extra > 0) e.title += " " + pick(kRoots, rng);
    e.title += " " + pick(kSuffixes, rng);
    std::uniform_int_distribution<size_t> dl(8, 14);
    e.description = sample_words(kContextWords, dl(rng), rng);
    e.wikipedia_url = url_for(e.title, bm.entities.size());
    e.qid = qid_for(bm.entities.size());
    e.instance_of = {bm.entities.size() % 2 == 0 ? "product" : "organization"};
    e.embedding = random_unit_vector(spec.dim, rng);
    add_entity(std::move(e));
  }

  assign_ids(bm);
  return bm;
}

Benchmark make_homonym_fixture(size_t n_pairs, uint32_t dim, uint64_t seed,
                               double misleading_rate) {
  Benchmark bm;
  bm.dim = dim;
  Rng rng(seed);
  StubEncoder encoder(dim);

  for (size_t i = 0; i < n_pairs; ++i) {
    std::string shared = kRoots[i % kRoots.size()] + std::to_string(1000 + i);
    bool misleading =
        static_cast<size_t>(std::floor((i + 1) * misleading_rate)) >
        static_cast<size_t>(std::floor(i * misleading_rate));

    SynthEntity gold;
    gold.title = shared + " prime suite";
    std::vector<std::string> ctx;
    gold.description = sample_words(kContextWords, 8, rng, &ctx);
    ctx.resize(4);
    gold.wikipedia_url = url_for(gold.title, bm.entities.size());
    gold.qid = qid_for(bm.entities.size());
    gold.instance_of = {"product"};
    gold.embedding = random_unit_vector(dim, rng);
    size_t gold_idx = bm.entities.size();
    bm.entities.push_back(std::move(gold));

    if (misleading) {
      // Exact one-token title out-scores the gold on BM25 field length.
      SynthEntity decoy;
      decoy.title = shared;
      decoy.description = sample_words(kContextWords, 6, rng);
      decoy.wikipedia_url = url_for(decoy.title, bm.entities.size());
      decoy.qid = qid_for(bm.entities.size());
      decoy.instance_of = {"organization"};
      decoy.embedding = random_unit_vector(dim, rng);
      bm.entities.push_back(std::move(decoy));
    }

    GoldUtterance g;
    g.text = make_utterance(i, shared, ctx, &g.start, &g.end);
    g.qid = bm.entities[gold_idx].qid;
    bm.entities[gold_idx].embedding = encoder.encode(g.text, g.start, g.end);
    bm.gold.push_back(std::move(g));
    bm.aliases.emplace_back(shared, "product");
  }

  // Filler mass so idf values are not degenerate.
  for (size_t i = 0; i < 200; ++i) {
    SynthEntity e;
    e.title = pick(kRoots, rng) + " " + pick(kSuffixes, rng);
    e.description = sample_words(kContextWords, 10, rng);
    e.wikipedia_url = url_for(e.title, bm.entities.size());
    e.qid = qid_for(bm.entities.size());
    e.instance_of = {"organization"};
    e.embedding = random_unit_vector(dim, rng);
    bm.entities.push_back(std::move(e));
  }

  assign_ids(bm);
  return bm;
}

Benchmark make_filter_dump(size_t n_entities, uint32_t dim, uint64_t seed) {
  Benchmark bm;
  bm.dim = dim;
  Rng rng(seed);
  const std::vector<std::string> banned = {"person", "location", "disambiguation"};
  for (size_t i = 0; i < n_entities; ++i) {
    SynthEntity e;
    e.title = pick(kRoots, rng) + std::to_string(i) + " " + pick(kSuffixes, rng);
    e.description = sample_words(kContextWords, 8, rng);
    e.wikipedia_url = url_for(e.title, i);
    e.qid = qid_for(i);
    if (i % 2 == 0)
      e.instance_of = {i % 4 == 0 ? "product" : "organization"};
    else
      e.instance_of = {banned[(i / 2) % banned.size()]};
    e.embedding = random_unit_vector(dim, rng);
    bm.entities.push_back(std::move(e));
  }
  assign_ids(bm);
  return bm;
}

std::vector<std::string> sample_queries(const Benchmark& bm, size_t n, uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<size_t> de(0, bm.entities.size() - 1);
  std::uniform_int_distribution<int> dn(1, 3);
  std::uniform_int_distribution<int> doov(0, 9);
  std::vector<std::string> queries;
  queries.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const SynthEntity& e = bm.entities[de(rng)];
    auto title_tokens = token_texts(e.title);
    auto desc_tokens = token_texts(e.description);
    std::string q;
    int want = dn(rng);
    for (int j = 0; j < want; ++j) {
      const auto& pool = (j % 2 == 0 || desc_tokens.empty()) ? title_tokens : desc_tokens;
      if (pool.empty()) continue;
      std::uniform_int_distribution<size_t> dp(0, pool.size() - 1);
      if (!q.empty()) q.push_back(' ');
      q += pool[dp(rng)];
    }
    if (doov(rng) == 0) q += " qzx" + std::to_string(i);  // out-of-vocabulary tail
    if (q.empty()) q = "acme";
    queries.push_back(std::move(q));
  }
  return queries;
}

void write_dump_jsonl(const Benchmark& bm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create dump file: " + path.string());
  for (const auto& e : bm.entities) {
    nlohmann::json j = {
        {"title", e.title},
        {"description", e.description},
        {"wikipedia_url", e.wikipedia_url},
        {"embedding", e.embedding},
    };
    out << j.dump() << "\n";
  }
}

void write_mapping_tsv(const Benchmark& bm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create mapping file: " + path.string());
  for (const auto& e : bm.entities) {
    if (e.qid.empty()) continue;
    std::string underscored = e.title;
    for (auto& c : underscored)
      if (c == ' ') c = '_';
    out << underscored << '\t' << e.qid << '\t';
    for (size_t i = 0; i < e.instance_of.size(); ++i) {
      if (i) out << ',';
      out << e.instance_of[i];
    }
    out << "\n";
  }
}

void write_gold_jsonl(const Benchmark& bm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create gold file: " + path.string());
  for (const auto& g : bm.gold) {
    nlohmann::json j = {
        {"text", g.text}, {"start", g.start}, {"end", g.end}, {"qid", g.qid}};
    out << j.dump() << "\n";
  }
}

void write_alias_tsv(const Benchmark& bm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot create alias file: " + path.string());
  for (const auto& [surface, label] : bm.aliases) out << surface << '\t' << label << "\n";
}

KbStats build_kb_direct(const Benchmark& bm, const std::filesystem::path& dir) {
  KbWriter writer(dir, bm.dim);
  for (const auto& e : bm.entities) {
    EntityRecord rec;
    rec.entity_id = e.entity_id;
    rec.title = e.title;
    rec.description = e.description;
    rec.wikipedia_url = e.wikipedia_url;
    if (!e.qid.empty()) rec.wikidata_qid = e.qid;
    rec.instance_of = e.instance_of;
    writer.put(std::move(rec), e.embedding);
  }
  return writer.finalize();
}

}  // namespace elkb::synth
