#pragma once

// Token and character id maps. PAD is always id 0 and UNK id 1, for both
// tokens and characters. Characters are the Unicode scalar values of the
// token string.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpmrc/errors.hpp"
#include "mpmrc/types.hpp"

namespace mpmrc {

inline std::vector<std::uint32_t> utf8_scalars(const std::string& s) {
  std::vector<std::uint32_t> out;
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    std::uint32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      extra = 3;
    } else {
      cp = 0xfffd;  // invalid byte
    }
    ++i;
    for (int k = 0; k < extra && i < s.size(); ++k, ++i)
      cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3f);
    out.push_back(cp);
  }
  return out;
}

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary() {
    id_to_token_ = {"<pad>", "<unk>"};
    token_to_id_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
    char_count_ = 2;  // PAD, UNK
  }

  int add_token(const std::string& tok) {
    auto it = token_to_id_.find(tok);
    if (it != token_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_token_.size());
    token_to_id_.emplace(tok, id);
    id_to_token_.push_back(tok);
    return id;
  }

  void add_chars_of(const std::string& tok) {
    for (std::uint32_t cp : utf8_scalars(tok))
      if (!char_to_id_.count(cp)) char_to_id_.emplace(cp, char_count_++);
  }

  int token_id(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  std::vector<int> char_ids(const std::string& tok) const {
    std::vector<int> out;
    for (std::uint32_t cp : utf8_scalars(tok)) {
      auto it = char_to_id_.find(cp);
      out.push_back(it == char_to_id_.end() ? kUnk : it->second);
    }
    if (out.empty()) out.push_back(kUnk);
    return out;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
      throw ContractError("Vocabulary: token id out of range");
    return id_to_token_[id];
  }

  int n_tokens() const { return static_cast<int>(id_to_token_.size()); }
  int n_chars() const { return char_count_; }

  // Remap a known token to UNK (used when pretrained vectors are required
  // but missing for it).
  void drop_token(const std::string& tok) {
    auto it = token_to_id_.find(tok);
    if (it != token_to_id_.end() && it->second >= 2) token_to_id_.erase(it);
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }
  const std::unordered_map<std::uint32_t, int>& chars() const { return char_to_id_; }
  std::unordered_map<std::uint32_t, int>& chars_mutable() { return char_to_id_; }
  void set_char_count(int n) { char_count_ = n; }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::uint32_t, int> char_to_id_;
  int char_count_ = 2;
};

}  // namespace mpmrc
