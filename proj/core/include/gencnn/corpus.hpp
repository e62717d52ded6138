#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace gencnn {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kEosToken = "</s>";

/// Word/id map with occurrence counts and the word-cluster partition used by
/// the hierarchical softmax. Immutable once built; safe for concurrent readers.
class Vocabulary {
 public:
  int size() const { return static_cast<int>(words_.size()); }
  int unk_id() const { return unk_id_; }
  int eos_id() const { return eos_id_; }

  const std::string& word(int id) const { return words_.at(static_cast<size_t>(id)); }
  /// Returns unk_id for out-of-vocabulary surface forms.
  int id(const std::string& w) const;
  bool contains(const std::string& w) const { return ids_.count(w) != 0; }
  uint64_t count(int id) const { return counts_.at(static_cast<size_t>(id)); }
  uint64_t total_count() const { return total_count_; }

  int cluster_of(int id) const { return clusters_.at(static_cast<size_t>(id)); }
  int cluster_count() const { return static_cast<int>(members_.size()); }
  const std::vector<int>& cluster_members(int c) const { return members_.at(static_cast<size_t>(c)); }

  /// Whitespace tokenization; OOV maps to unk, eos appended.
  std::vector<int> encode(const std::string& line) const;
  /// Surface forms joined by single spaces; a trailing eos is dropped.
  std::string decode(const std::vector<int>& ids) const;

  /// One `word<TAB>count<TAB>cluster` line per id, in id order.
  void save(std::ostream& os) const;
  std::string serialize() const;
  static Vocabulary load(std::istream& is);
  static Vocabulary load_file(const std::string& path);
  void save_file(const std::string& path) const;

  /// FNV-1a over serialize(); identifies the exact vocabulary.
  uint64_t content_hash() const;

  friend Vocabulary build_vocabulary(std::istream&, int, int);
  friend void assign_clusters(Vocabulary&, int);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  std::vector<uint64_t> counts_;
  std::vector<int> clusters_;
  std::vector<std::vector<int>> members_;
  uint64_t total_count_ = 0;
  int unk_id_ = 0;
  int eos_id_ = 1;

  void rebuild_members();
  void check_invariants() const;
};

/// Builds a vocabulary from one-sentence-per-line text: the max_size-2 most
/// frequent surface forms plus unk and eos, frequency ties broken by
/// lexicographic order, then clustered by equal probability mass.
Vocabulary build_vocabulary(std::istream& corpus, int max_size, int cluster_count);
Vocabulary build_vocabulary_file(const std::string& path, int max_size, int cluster_count);

/// Re-partition words into min(cluster_count, |V|) clusters: scan words by
/// descending count (ties lexicographic) and start a new cluster whenever the
/// running unigram mass of the current one reaches 1/cluster_count.
void assign_clusters(Vocabulary& vocab, int cluster_count);

struct SentenceBatch {
  std::vector<std::vector<int>> sequences;  // each eos-terminated
  int64_t token_count() const;
};

SentenceBatch read_corpus(std::istream& is, const Vocabulary& vocab);
SentenceBatch read_corpus_file(const std::string& path, const Vocabulary& vocab);

std::vector<std::string> split_tokens(const std::string& line);

}  // namespace gencnn
