// Copyright 2026 The PueLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Closed name gazetteer: 200 first names x 200 last names.

#include <string>
#include <vector>

#include "puelab/corpus.h"

namespace puelab {

const std::vector<std::string>& first_names() {
  static const std::vector<std::string> kNames = {
      "James", "Mary", "Robert", "Patricia", "John", "Jennifer", "Michael",
      "Linda", "David", "Elizabeth", "William", "Barbara", "Richard", "Susan",
      "Joseph", "Jessica", "Thomas", "Sarah", "Charles", "Karen", "Christopher",
      "Lisa", "Daniel", "Nancy", "Matthew", "Betty", "Anthony", "Margaret",
      "Mark", "Sandra", "Donald", "Ashley", "Steven", "Kimberly", "Paul",
      "Emily", "Andrew", "Donna", "Joshua", "Michelle", "Kenneth", "Carol",
      "Kevin", "Amanda", "Brian", "Dorothy", "George", "Melissa", "Timothy",
      "Deborah", "Ronald", "Stephanie", "Edward", "Rebecca", "Jason", "Sharon",
      "Jeffrey", "Laura", "Ryan", "Cynthia", "Jacob", "Kathleen", "Gary", "Amy",
      "Nicholas", "Angela", "Eric", "Shirley", "Jonathan", "Anna", "Stephen",
      "Brenda", "Larry", "Pamela", "Justin", "Emma", "Scott", "Nicole",
      "Brandon", "Helen", "Benjamin", "Samantha", "Samuel", "Katherine",
      "Gregory", "Christine", "Alexander", "Debra", "Frank", "Rachel",
      "Patrick", "Carolyn", "Raymond", "Janet", "Jack", "Catherine", "Dennis",
      "Maria", "Jerry", "Heather", "Tyler", "Diane", "Aaron", "Ruth", "Jose",
      "Julie", "Adam", "Olivia", "Nathan", "Joyce", "Henry", "Virginia",
      "Douglas", "Victoria", "Zachary", "Kelly", "Peter", "Lauren", "Kyle",
      "Christina", "Ethan", "Joan", "Walter", "Evelyn", "Noah", "Judith",
      "Jeremy", "Megan", "Christian", "Andrea", "Keith", "Cheryl", "Roger",
      "Hannah", "Terry", "Jacqueline", "Gerald", "Martha", "Harold", "Gloria",
      "Sean", "Teresa", "Austin", "Ann", "Carl", "Sara", "Arthur", "Madison",
      "Lawrence", "Frances", "Dylan", "Kathryn", "Jesse", "Janice", "Jordan",
      "Jean", "Bryan", "Abigail", "Billy", "Alice", "Joe", "Julia", "Bruce",
      "Judy", "Gabriel", "Sophia", "Logan", "Grace", "Albert", "Denise",
      "Willie", "Amber", "Alan", "Doris", "Juan", "Marilyn", "Wayne",
      "Danielle", "Elijah", "Beverly", "Randy", "Isabella", "Roy", "Theresa",
      "Vincent", "Diana", "Ralph", "Natalie", "Eugene", "Brittany", "Russell",
      "Charlotte", "Bobby", "Marie", "Mason", "Kayla", "Philip", "Alexis",
      "Phillip", "Lori",  };
  return kNames;
}

const std::vector<std::string>& last_names() {
  static const std::vector<std::string> kNames = {
      "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller",
      "Davis", "Rodriguez", "Martinez", "Hernandez", "Lopez", "Gonzalez",
      "Wilson", "Anderson", "Thomas", "Taylor", "Moore", "Jackson", "Martin",
      "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez", "Clark",
      "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen", "King",
      "Wright", "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green", "Adams",
      "Nelson", "Baker", "Hall", "Rivera", "Campbell", "Mitchell", "Carter",
      "Roberts", "Gomez", "Phillips", "Evans", "Turner", "Diaz", "Parker",
      "Cruz", "Edwards", "Collins", "Reyes", "Stewart", "Morris", "Morales",
      "Murphy", "Cook", "Rogers", "Gutierrez", "Ortiz", "Morgan", "Cooper",
      "Peterson", "Bailey", "Reed", "Kelly", "Howard", "Ramos", "Kim", "Cox",
      "Ward", "Richardson", "Watson", "Brooks", "Chavez", "Wood", "James",
      "Bennett", "Gray", "Mendoza", "Ruiz", "Hughes", "Price", "Alvarez",
      "Castillo", "Sanders", "Patel", "Myers", "Long", "Ross", "Foster",
      "Jimenez", "Powell", "Jenkins", "Perry", "Russell", "Sullivan", "Bell",
      "Coleman", "Butler", "Henderson", "Barnes", "Gonzales", "Fisher",
      "Vasquez", "Simmons", "Romero", "Jordan", "Patterson", "Alexander",
      "Hamilton", "Graham", "Reynolds", "Griffin", "Wallace", "Moreno", "West",
      "Cole", "Hayes", "Bryant", "Herrera", "Gibson", "Ellis", "Tran", "Medina",
      "Aguilar", "Stevens", "Murray", "Ford", "Castro", "Marshall", "Owens",
      "Harrison", "Fernandez", "McDonald", "Woods", "Washington", "Kennedy",
      "Wells", "Vargas", "Henry", "Chen", "Freeman", "Webb", "Tucker", "Guzman",
      "Burns", "Crawford", "Olson", "Simpson", "Porter", "Hunter", "Gordon",
      "Mendez", "Silva", "Shaw", "Snyder", "Mason", "Dixon", "Munoz", "Hunt",
      "Hicks", "Holmes", "Palmer", "Wagner", "Black", "Robertson", "Boyd",
      "Rose", "Stone", "Salazar", "Fox", "Warren", "Mills", "Meyer", "Rice",
      "Schmidt", "Garza", "Daniels", "Ferguson", "Nichols", "Stephens", "Soto",
      "Weaver", "Ryan", "Gardner", "Payne", "Grant", "Dunn", "Kelley",
      "Spencer", "Pena",  };
  return kNames;
}

}  // namespace puelab
