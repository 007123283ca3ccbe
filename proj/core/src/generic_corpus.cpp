#include "endo/tokenizer.hpp"

namespace endo {

namespace {

// Everyday English with a handful of "poly-" words and no clinical terms.
const std::vector<std::string> kGenericText = {
    "The quick brown fox jumps over the lazy dog near the river bank.",
    "polygons and polymers are studied in geometry and chemistry classes.",
    "polynomials appear in algebra, and a polygon has many straight sides.",
    "She walked to the market in the morning to buy fresh bread and apples.",
    "The city council met on Tuesday to discuss the new public library.",
    "polyester shirts dry quickly after a long day of rain in the park.",
    "Many people enjoy reading books about history, science and travel.",
    "The weather was cold and windy, so the children stayed inside to play.",
    "polyglots speak several languages and often travel to distant places.",
    "He opened the window and listened to the birds singing in the garden.",
    "A good meal with friends can make the whole evening feel warm.",
    "polyphony is music with many voices singing different lines together.",
    "The train left the station at noon and arrived late in the evening.",
    "Our team finished the project before the deadline and celebrated.",
    "polymath scholars once wrote about art, music, law and medicine alike.",
    "The museum opened a new exhibit about ancient ships and the sea.",
    "After dinner they played cards and talked about their summer plans.",
    "polygraph machines record breathing and pulse while people answer.",
    "The small shop on the corner sells coffee, tea and fresh pastries.",
    "Students wrote essays about their favorite places and best memories.",
    "polytechnic schools teach engineering, design and applied science.",
    "The mountain road was narrow, steep and covered with loose stones.",
    "She painted the fence white and planted flowers along the path.",
    "polycarbonate sheets are strong, clear and light for their size.",
    "Every morning the baker lights the oven long before the sun rises.",
    "The old bridge was repaired last year and now carries heavy trucks.",
    "polygonal tiles cover the floor of the hall in a bright pattern.",
    "They watched a film about a family that sailed around the world.",
    "The garden needs water every day during the hot summer months.",
    "polyhedra such as cubes and pyramids have flat faces and edges.",
    "A letter arrived from an old friend who now lives far away.",
    "The concert hall was full, and the orchestra played until late.",
    "polynomial equations can have several roots or none at all.",
    "Please close the door quietly when you leave the reading room.",
    "The farmer sold corn, beans and potatoes at the weekend market.",
    "polymer chemistry explains how long chains of molecules behave.",
    "We took the bus to the beach and swam in the cool blue water.",
    "The teacher asked everyone to bring a pencil and a notebook.",
    "polyglot programmers write code in many languages every week.",
    "Snow fell all night, and by morning the streets were white.",
};

}  // namespace

std::span<const std::string> generic_corpus() { return kGenericText; }

}  // namespace endo
