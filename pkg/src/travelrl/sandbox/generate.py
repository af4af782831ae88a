"""Seeded synthetic travel database.

States sit on a ring; cities scatter around their state's center. Ground
routes (self-driving and taxi) connect every pair of cities in the same or
adjacent states. Pairs without a ground route get at least one flight on
every date; pairs with one get flights on a random subset of dates. That
makes every ordered pair reachable on every date.
"""

from __future__ import annotations

import datetime as dt
import math
import random
from dataclasses import asdict, dataclass

from .db import (
    HOUSE_RULES,
    ROOM_TYPES,
    AccommodationRecord,
    AttractionRecord,
    DistanceRecord,
    FlightRecord,
    RestaurantRecord,
    SandboxDb,
    validate_db,
)

CUISINES = ("Chinese", "American", "Italian", "Mexican", "Indian", "Mediterranean", "French")
EXTRA_CUISINES = ("Cafe", "Bakery", "BBQ", "Fast Food", "Desserts", "Tea", "Pizza", "Seafood")

STATE_POOL: dict[str, tuple[str, ...]] = {
    "Texas": ("Houston", "Austin", "San Antonio", "Dallas", "El Paso", "Lubbock", "Waco", "Abilene"),
    "Wisconsin": ("Milwaukee", "Madison", "Green Bay", "Appleton", "Mosinee", "Rhinelander", "La Crosse", "Eau Claire"),
    "Michigan": ("Detroit", "Grand Rapids", "Lansing", "Kalamazoo", "Saginaw", "Traverse City", "Alpena", "Muskegon"),
    "Louisiana": ("Baton Rouge", "New Orleans", "Lafayette", "Lake Charles", "Shreveport", "Monroe", "Alexandria", "Houma"),
    "Florida": ("St. Petersburg", "Miami", "Orlando", "Tampa", "Sarasota", "Tallahassee", "Pensacola", "Gainesville"),
    "California": ("San Francisco", "Los Angeles", "San Diego", "Sacramento", "Fresno", "Oakland", "Santa Barbara", "Bakersfield"),
    "Washington": ("Everett", "Seattle", "Spokane", "Yakima", "Bellingham", "Pasco", "Wenatchee", "Walla Walla"),
    "New York": ("New York", "Buffalo", "Rochester", "Albany", "Syracuse", "Ithaca", "Elmira", "Plattsburgh"),
}

_ADJ = ("Golden", "Blue", "Rustic", "Little", "Old", "Urban", "Green", "Silver", "Sunny", "Hidden",
        "Royal", "Happy", "Spice", "Copper", "Lucky", "Twin")
_NOUN = ("Spoon", "Table", "Kitchen", "Garden", "Bistro", "Grill", "Oven", "Lantern", "Harbor",
         "Corner", "Fork", "Pot", "Terrace", "Diner", "Wok", "Cellar")
_SIGHT = ("Museum of Art", "History Museum", "Botanical Garden", "Science Center", "Zoo",
          "Riverside Park", "Aquarium", "Observatory", "Memorial Park", "Old Town Square",
          "Heritage Village", "Sculpture Garden")
_STAY_A = ("Cozy", "Bright", "Quiet", "Spacious", "Charming", "Modern", "Sunny", "Stylish", "Lovely", "Classic")
_STAY_B = ("loft", "studio", "bedroom", "apartment", "guest suite", "cottage", "townhouse", "room")
_STAY_C = ("near downtown", "by the park", "with rooftop", "close to transit", "with garden", "in old town")


@dataclass(frozen=True)
class DbScale:
    n_states: int = 4
    cities_per_state: int = 5
    n_dates: int = 14
    start_date: str = "2022-03-01"
    flights_per_route_date: tuple[int, int] = (1, 2)
    restaurants_per_city: int = 8
    attractions_per_city: int = 4
    accommodations_per_city: int = 6
    adjacent_ground: bool = True

    @classmethod
    def preset(cls, name: str) -> "DbScale":
        try:
            return SCALES[name]
        except KeyError:
            raise ValueError(f"unknown scale {name!r}; choose from {sorted(SCALES)}") from None


SCALES: dict[str, DbScale] = {
    "tiny": DbScale(n_states=2, cities_per_state=3, n_dates=5, restaurants_per_city=5,
                    attractions_per_city=3, accommodations_per_city=3),
    "mini": DbScale(n_states=2, cities_per_state=3, n_dates=12, restaurants_per_city=5,
                    attractions_per_city=3, accommodations_per_city=3),
    "desk": DbScale(),
    "large": DbScale(n_states=8, cities_per_state=8, n_dates=21, restaurants_per_city=12,
                     attractions_per_city=6, accommodations_per_city=8),
}


def _fmt_clock(minutes: int) -> str:
    minutes %= 24 * 60
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def generate_db(seed: int, scale: DbScale | str = "desk") -> SandboxDb:
    """Build a deterministic database for ``(seed, scale)``."""
    if isinstance(scale, str):
        scale = DbScale.preset(scale)
    if scale.n_states < 1 or scale.cities_per_state < 1:
        raise ValueError("scale must have at least one state and one city per state")
    if scale.n_states > len(STATE_POOL) or scale.cities_per_state > 8:
        raise ValueError("scale exceeds the built-in name pool (8 states x 8 cities)")
    if scale.n_dates < 1:
        raise ValueError("scale must cover at least one date")
    lo, hi = scale.flights_per_route_date
    if lo < 1 or hi < lo:
        raise ValueError("flights_per_route_date must satisfy 1 <= lo <= hi")
    if scale.restaurants_per_city < 3 or scale.attractions_per_city < 3 or scale.accommodations_per_city < 1:
        raise ValueError("need >= 3 restaurants, >= 3 attractions and >= 1 accommodation per city")

    rng = random.Random(seed)
    state_names = list(STATE_POOL)[: scale.n_states]
    cities = {s: STATE_POOL[s][: scale.cities_per_state] for s in state_names}

    pos: dict[str, tuple[float, float]] = {}
    state_idx: dict[str, int] = {}
    for i, s in enumerate(state_names):
        ang = 2 * math.pi * i / max(scale.n_states, 1)
        cx, cy = 900 * math.cos(ang), 900 * math.sin(ang)
        for c in cities[s]:
            pos[c] = (cx + rng.uniform(-220, 220), cy + rng.uniform(-220, 220))
            state_idx[c] = i

    start = dt.date.fromisoformat(scale.start_date)
    dates = [(start + dt.timedelta(days=k)).isoformat() for k in range(scale.n_dates)]
    all_cities = [c for s in state_names for c in cities[s]]

    def adjacent(a: str, b: str) -> bool:
        d = abs(state_idx[a] - state_idx[b])
        d = min(d, scale.n_states - d)
        return d == 0 or (scale.adjacent_ground and d == 1)

    distances: list[DistanceRecord] = []
    flights: list[FlightRecord] = []
    used_numbers: set[str] = set()

    def new_flight_number() -> str:
        while True:
            num = f"F{rng.randint(1_000_000, 9_999_999)}"
            if num not in used_numbers:
                used_numbers.add(num)
                return num

    for a in all_cities:
        for b in all_cities:
            if a == b:
                continue
            km = max(1.0, round(math.dist(pos[a], pos[b])))
            ground = adjacent(a, b)
            if ground:
                minutes = int(round(km / 85.0 * 60))
                distances.append(DistanceRecord(a, b, "self-driving", minutes, km, max(1, int(round(km * 0.05)))))
                distances.append(DistanceRecord(a, b, "taxi", minutes, km, max(1, int(round(km)))))
            miles = round(km / 1.609, 1)
            for date in dates:
                if ground and rng.random() < 0.5:
                    continue
                for _ in range(rng.randint(lo, hi)):
                    dep = rng.randrange(5 * 60, 23 * 60)
                    elapsed = int(round(miles / 450.0 * 60)) + rng.randint(25, 70)
                    price = max(20, int(round(miles * rng.uniform(0.12, 0.3))) + rng.randint(0, 60))
                    flights.append(
                        FlightRecord(
                            flight_number=new_flight_number(),
                            price=price,
                            departure_city=a,
                            destination_city=b,
                            date=date,
                            departure_time=_fmt_clock(dep),
                            arrival_time=_fmt_clock(dep + elapsed),
                            elapsed=elapsed,
                            distance_miles=miles,
                        )
                    )

    restaurants: list[RestaurantRecord] = []
    attractions: list[AttractionRecord] = []
    accommodations: list[AccommodationRecord] = []
    for c in all_cities:
        # dicts keep insertion order; iterating a set of str would depend on hash seeding
        names: dict[str, None] = {}
        while len(names) < scale.restaurants_per_city:
            names[f"{rng.choice(_ADJ)} {rng.choice(_NOUN)}"] = None
        shuffled = list(names)
        rng.shuffle(shuffled)
        for n in shuffled:
            k = rng.randint(2, 4)
            cuisines = rng.sample(CUISINES, rng.randint(1, 2)) + rng.sample(EXTRA_CUISINES, k - 1)
            rng.shuffle(cuisines)
            restaurants.append(
                RestaurantRecord(n, c, rng.randint(10, 90), tuple(cuisines), round(rng.uniform(2.0, 5.0), 1))
            )

        for j, sight in enumerate(rng.sample(_SIGHT, scale.attractions_per_city)):
            name = f"{c} {sight}"
            slug = name.lower().replace(" ", "").replace(".", "")
            attractions.append(
                AttractionRecord(
                    name=name,
                    city=c,
                    url=f"https://www.{slug}.org/",
                    address=f"{rng.randint(10, 9999)} {rng.choice(_NOUN)} St, {c}, USA",
                    contact=f"({rng.randint(200, 989)}) {rng.randint(200, 999)}-{rng.randint(1000, 9999)}",
                )
            )

        stay_names: dict[str, None] = {}
        while len(stay_names) < scale.accommodations_per_city:
            sep = ", " if rng.random() < 0.3 else " "
            stay_names[f"{rng.choice(_STAY_A)}{sep}{rng.choice(_STAY_B)} {rng.choice(_STAY_C)}"] = None
        shuffled = list(stay_names)
        rng.shuffle(shuffled)
        for j, n in enumerate(shuffled):
            k_rules = rng.choice((0, 1, 1, 2))
            rules = tuple(sorted(rng.sample(HOUSE_RULES, k_rules), key=HOUSE_RULES.index))
            accommodations.append(
                AccommodationRecord(
                    name=n,
                    city=c,
                    price=float(rng.randint(40, 400)),
                    room_type=rng.choice(ROOM_TYPES),
                    house_rules=rules,
                    # the first stay per city always admits a two-night visit
                    minimum_nights=1 if j == 0 else rng.choice((1, 1, 2, 2, 3, 4)),
                    maximum_occupancy=rng.choice((1, 2, 2, 3, 4, 6)),
                    review_rate=round(rng.uniform(1.0, 5.0), 1),
                )
            )

    manifest = {"seed": seed, "scale": asdict(scale), "dates": dates}
    manifest["scale"]["flights_per_route_date"] = list(scale.flights_per_route_date)
    db = SandboxDb(
        cities=cities,
        flights=flights,
        distances=distances,
        restaurants=restaurants,
        attractions=attractions,
        accommodations=accommodations,
        manifest=manifest,
    )
    validate_db(db)
    return db
