// SPDX-License-Identifier: Apache-2.0
//
// kran - knowledge-supported radio access network control
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef KRAN_JSON_LINES_HPP
#define KRAN_JSON_LINES_HPP

#include <cctype>
#include <map>
#include <string>
#include <string_view>

namespace kran {

// Maps JSON pointers to the 1-based source line where the member key (or
// array element) starts. Only meant for text that already parsed cleanly;
// used to point validation errors at a line.
class JsonLineIndex {
public:
    explicit JsonLineIndex(std::string_view text) : text_(text)
    {
        skip_ws();
        if (pos_ < text_.size()) value("", line_);
    }

    // Line of `pointer`, or of its nearest recorded ancestor.
    int line_of(std::string pointer) const
    {
        for (;;) {
            if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
            const auto slash = pointer.rfind('/');
            if (slash == std::string::npos) return 1;
            pointer.erase(slash);
        }
    }

private:
    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string string_token()
    {
        std::string out;
        ++pos_; // opening quote
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
                out += text_[pos_ + 1];
                pos_ += 2;
                continue;
            }
            out += text_[pos_++];
        }
        ++pos_; // closing quote
        return out;
    }

    static std::string escape(const std::string &key)
    {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out += c;
        }
        return out;
    }

    void value(const std::string &path, int line)
    {
        lines_.emplace(path, line);
        if (pos_ >= text_.size()) return;
        const char c = text_[pos_];
        if (c == '{') {
            ++pos_;
            skip_ws();
            while (pos_ < text_.size() && text_[pos_] != '}') {
                const int key_line = line_;
                const std::string key = string_token();
                skip_ws();
                ++pos_; // ':'
                skip_ws();
                value(path + "/" + escape(key), key_line);
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '[') {
            ++pos_;
            skip_ws();
            for (std::size_t i = 0; pos_ < text_.size() && text_[pos_] != ']'; ++i) {
                value(path + "/" + std::to_string(i), line_);
                skip_ws();
                if (pos_ < text_.size() && text_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '"') {
            string_token();
        } else {
            while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
                   text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']')
                ++pos_;
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

} // namespace kran

#endif // KRAN_JSON_LINES_HPP
