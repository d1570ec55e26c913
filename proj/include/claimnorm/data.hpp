#pragma once

#include <string_view>

// Contents of the files under data/, compiled into the library.
namespace claimnorm::data {

std::string_view defaults_conf();
std::string_view stopwords_en();
std::string_view zeroshot_examples();

}  // namespace claimnorm::data
