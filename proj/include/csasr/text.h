// csasr/text.h

// Copyright 2026 The csasr Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CSASR_TEXT_H_
#define CSASR_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace csasr {

// Splits UTF-8 text into code-point substrings. Malformed bytes are passed
// through one byte at a time.
std::vector<std::string> Utf8Chars(std::string_view s);
char32_t DecodeUtf8(std::string_view ch);
std::string EncodeUtf8(char32_t cp);

// CJK Unified Ideographs (including Extension A and compatibility block).
bool IsCjk(char32_t cp);
bool IsCjkChar(std::string_view ch);

// Matches [A-Za-z'-]+.
bool IsEnglishWord(std::string_view s);

std::vector<std::string> SplitWhitespace(std::string_view s);
std::vector<std::string> SplitString(std::string_view s, char sep);
std::string Join(const std::vector<std::string>& parts, std::string_view sep);
std::string ToLowerAscii(std::string_view s);
std::string Trim(std::string_view s);

}  // namespace csasr

#endif  // CSASR_TEXT_H_
