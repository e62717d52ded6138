#include "gencnn/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gencnn/errors.hpp"

namespace gencnn {

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

int Vocabulary::id(const std::string& w) const {
  auto it = ids_.find(w);
  return it == ids_.end() ? unk_id_ : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& line) const {
  std::vector<int> out;
  for (const std::string& tok : split_tokens(line)) out.push_back(id(tok));
  out.push_back(eos_id_);
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  size_t n = ids.size();
  if (n > 0 && ids.back() == eos_id_) --n;
  for (size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += word(ids[i]);
  }
  return out;
}

void Vocabulary::save(std::ostream& os) const {
  for (int i = 0; i < size(); ++i) {
    os << words_[static_cast<size_t>(i)] << '\t' << counts_[static_cast<size_t>(i)] << '\t'
       << clusters_[static_cast<size_t>(i)] << '\n';
  }
}

std::string Vocabulary::serialize() const {
  std::ostringstream os;
  save(os);
  return os.str();
}

Vocabulary Vocabulary::load(std::istream& is) {
  Vocabulary v;
  v.unk_id_ = -1;
  v.eos_id_ = -1;
  std::string line;
  int id = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw IoError("vocabulary line " + std::to_string(id + 1) + " is not word<TAB>count<TAB>cluster");
    }
    std::string word = line.substr(0, t1);
    uint64_t count = 0;
    int cluster = 0;
    try {
      count = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
      cluster = std::stoi(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw IoError("vocabulary line " + std::to_string(id + 1) + ": bad count or cluster");
    }
    if (v.ids_.count(word)) throw IoError("vocabulary: duplicate word '" + word + "'");
    v.words_.push_back(word);
    v.counts_.push_back(count);
    v.clusters_.push_back(cluster);
    v.ids_[word] = id;
    v.total_count_ += count;
    if (word == kUnkToken) v.unk_id_ = id;
    if (word == kEosToken) v.eos_id_ = id;
    ++id;
  }
  if (v.unk_id_ < 0 || v.eos_id_ < 0) {
    throw IoError(std::string("vocabulary is missing ") + kUnkToken + " or " + kEosToken);
  }
  v.rebuild_members();
  v.check_invariants();
  return v;
}

Vocabulary Vocabulary::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  return load(in);
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  save(out);
}

uint64_t Vocabulary::content_hash() const {
  std::string s = serialize();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void Vocabulary::rebuild_members() {
  int nc = 0;
  for (int c : clusters_) nc = std::max(nc, c + 1);
  members_.assign(static_cast<size_t>(nc), {});
  for (int id = 0; id < size(); ++id) {
    int c = clusters_[static_cast<size_t>(id)];
    if (c < 0) throw IoError("vocabulary: negative cluster index");
    members_[static_cast<size_t>(c)].push_back(id);
  }
  for (auto& m : members_) std::sort(m.begin(), m.end());
}

void Vocabulary::check_invariants() const {
  for (const auto& m : members_) {
    if (m.empty()) throw IoError("vocabulary: empty cluster in partition");
  }
}

Vocabulary build_vocabulary(std::istream& corpus, int max_size, int cluster_count) {
  if (max_size < 2) throw std::invalid_argument("max_size must be at least 2");
  if (cluster_count < 1 || cluster_count > max_size) {
    throw std::invalid_argument("cluster_count must be in [1, max_size]");
  }

  std::map<std::string, uint64_t> freq;  // ordered: lexicographic tie-break for free
  uint64_t unk_count = 0;
  uint64_t eos_count = 0;
  int64_t lines = 0;
  std::string line;
  while (std::getline(corpus, line)) {
    ++lines;
    ++eos_count;
    for (const std::string& tok : split_tokens(line)) {
      if (tok == kUnkToken) {
        ++unk_count;  // reserved surface forms count toward the reserved ids
      } else if (tok == kEosToken) {
        ++eos_count;
      } else {
        ++freq[tok];
      }
    }
  }
  if (lines == 0) throw IoError("empty corpus: no lines to ingest");

  // order candidates by descending count, ties by lexicographic surface form
  std::vector<std::pair<std::string, uint64_t>> cand(freq.begin(), freq.end());
  std::stable_sort(cand.begin(), cand.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  size_t keep = std::min(cand.size(), static_cast<size_t>(max_size - 2));
  for (size_t i = keep; i < cand.size(); ++i) unk_count += cand[i].second;

  Vocabulary v;
  v.words_ = {kUnkToken, kEosToken};
  v.counts_ = {unk_count, eos_count};
  v.unk_id_ = 0;
  v.eos_id_ = 1;
  for (size_t i = 0; i < keep; ++i) {
    v.words_.push_back(cand[i].first);
    v.counts_.push_back(cand[i].second);
  }
  for (int id = 0; id < v.size(); ++id) v.ids_[v.words_[static_cast<size_t>(id)]] = id;
  v.total_count_ = 0;
  for (uint64_t c : v.counts_) v.total_count_ += c;

  assign_clusters(v, cluster_count);
  return v;
}

Vocabulary build_vocabulary_file(const std::string& path, int max_size, int cluster_count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return build_vocabulary(in, max_size, cluster_count);
}

void assign_clusters(Vocabulary& vocab, int cluster_count) {
  if (cluster_count < 1) throw std::invalid_argument("cluster_count must be positive");
  int n = vocab.size();
  int target = std::min(cluster_count, n);

  // descending count, ties by lexicographic surface form
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&vocab](int a, int b) {
    uint64_t ca = vocab.count(a), cb = vocab.count(b);
    if (ca != cb) return ca > cb;
    return vocab.word(a) < vocab.word(b);
  });

  uint64_t total = vocab.total_count_;
  vocab.clusters_.assign(static_cast<size_t>(n), 0);
  int cluster = 0;
  uint64_t mass = 0;  // running count of the current cluster
  for (int i = 0; i < n; ++i) {
    int id = order[static_cast<size_t>(i)];
    vocab.clusters_[static_cast<size_t>(id)] = cluster;
    mass += vocab.count(id);
    int remaining_words = n - 1 - i;
    int clusters_still_needed = target - 1 - cluster;
    if (cluster < target - 1) {
      // close the cluster at 1/cluster_count of total mass (integer arithmetic),
      // or when each remaining word must open its own cluster
      bool mass_reached = mass * static_cast<uint64_t>(cluster_count) >= total;
      if (mass_reached || remaining_words == clusters_still_needed) {
        ++cluster;
        mass = 0;
      }
    }
  }
  vocab.rebuild_members();
  vocab.check_invariants();
}

int64_t SentenceBatch::token_count() const {
  int64_t n = 0;
  for (const auto& s : sequences) n += static_cast<int64_t>(s.size());
  return n;
}

SentenceBatch read_corpus(std::istream& is, const Vocabulary& vocab) {
  SentenceBatch batch;
  std::string line;
  while (std::getline(is, line)) {
    batch.sequences.push_back(vocab.encode(line));
  }
  return batch;
}

SentenceBatch read_corpus_file(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return read_corpus(in, vocab);
}

}  // namespace gencnn
