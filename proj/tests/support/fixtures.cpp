#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <random>

#include "elkb/text.hpp"

namespace elkb::test {

namespace {
std::atomic<uint64_t> g_counter{0};
}

TempDir::TempDir(const std::string& tag) {
  path_ = std::filesystem::current_path() /
          ("elkb_scratch_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(g_counter.fetch_add(1)));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::vector<EntityRecord> write_tiny_kb(const std::filesystem::path& dir) {
  KbWriter writer(dir, 4);
  std::vector<EntityRecord> records;

  EntityRecord a;
  a.entity_id = 7;
  a.title = "Acme Corporation";
  a.description = "fictional company selling anvils and rockets";
  a.wikipedia_url = "https://en.wikipedia.org/wiki/Acme_Corporation";
  a.wikidata_qid = "Q1001";
  a.instance_of = {"organization"};
  writer.put(a, std::vector<float>{1.0f, 0.0f, 0.0f, 0.0f});
  records.push_back(a);

  EntityRecord b;
  b.entity_id = 12;
  b.title = "Dialtone Analytics";
  b.description = "call analytics platform";
  b.wikipedia_url = "https://en.wikipedia.org/wiki/Dialtone_Analytics";
  b.wikidata_qid = "Q1002";
  b.instance_of = {"product"};
  writer.put(b, std::vector<float>{0.0f, 1.0f, 0.0f, 0.0f});
  records.push_back(b);

  EntityRecord c;
  c.entity_id = 40;
  c.title = "Zephyr";
  c.description = "";
  c.wikipedia_url = "https://en.wikipedia.org/wiki/Zephyr";
  c.instance_of = {};
  writer.put(c, std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f});
  records.push_back(c);

  writer.finalize();
  return records;
}

std::vector<RandomKbEntry> write_random_kb(const std::filesystem::path& dir, size_t n,
                                           uint32_t dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> df(-2.0f, 2.0f);
  std::uniform_int_distribution<int> dlen(1, 6);
  std::uniform_int_distribution<int> dword(0, 9);
  std::uniform_int_distribution<int> dtag(0, 3);
  const std::vector<std::string> words = {"alpha", "beta",  "gamma", "delta", "kappa",
                                          "sigma", "omega", "café",  "münze", "тест"};
  const std::vector<std::string> tags = {"product", "organization", "person", "location"};

  KbWriter writer(dir, dim);
  std::vector<RandomKbEntry> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    RandomKbEntry e;
    e.record.entity_id = 1000 + i * 3;
    int len = dlen(rng);
    for (int w = 0; w < len; ++w) {
      if (w) e.record.title += " ";
      e.record.title += words[dword(rng)];
    }
    e.record.title += " " + std::to_string(i);
    for (int w = 0; w < len + 2; ++w) {
      if (w) e.record.description += " ";
      e.record.description += words[dword(rng)];
    }
    e.record.wikipedia_url = "https://en.wikipedia.org/wiki/Rand_" + std::to_string(i);
    if (i % 3 != 0) e.record.wikidata_qid = "Q" + std::to_string(50000 + i);
    e.record.instance_of = {tags[dtag(rng)]};
    e.embedding.resize(dim);
    for (auto& v : e.embedding) v = df(rng);
    writer.put(e.record, e.embedding);
    e.record.embedding_dim = dim;
    out.push_back(std::move(e));
  }
  writer.finalize();
  return out;
}

}  // namespace elkb::test
