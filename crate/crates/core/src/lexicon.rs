//! Embedded word pools shared by the synthetic generator and the builtin
//! tagger gazetteers.

pub const SURNAMES: &[&str] = &[
    "Abernathy",
    "Acosta",
    "Adeyemi",
    "Albrecht",
    "Alvarez",
    "Andersen",
    "Asante",
    "Baptiste",
    "Barkley",
    "Beaumont",
    "Bergstrom",
    "Bhattacharya",
    "Blackwood",
    "Bouchard",
    "Castellano",
    "Chakraborty",
    "Chen",
    "Costigan",
    "Dalgleish",
    "Delacroix",
    "Dimitriou",
    "Dubois",
    "Eastwood",
    "Eriksson",
    "Esposito",
    "Fairbanks",
    "Fitzgerald",
    "Fontaine",
    "Gallagher",
    "Garcia",
    "Gonzaga",
    "Greenberg",
    "Haddad",
    "Halvorsen",
    "Hernandez",
    "Hollister",
    "Ibrahim",
    "Ivanova",
    "Jablonski",
    "Jorgensen",
    "Kaminski",
    "Kapoor",
    "Kowalczyk",
    "Kristiansen",
    "Lachance",
    "Lindqvist",
    "Lombardi",
    "MacPherson",
    "Magnusson",
    "Malhotra",
    "Marchetti",
    "McAllister",
    "Mendoza",
    "Moreau",
    "Nakamura",
    "Nasser",
    "Nguyen",
    "Novak",
    "Oduya",
    "Okafor",
    "Olszewski",
    "Ortega",
    "Pacheco",
    "Papadopoulos",
    "Pellegrini",
    "Petrov",
    "Quintero",
    "Rahman",
    "Ramirez",
    "Rasmussen",
    "Rossetti",
    "Sandoval",
    "Schneider",
    "Sorensen",
    "Stavros",
    "Sutherland",
    "Takahashi",
    "Tanaka",
    "Thibodeaux",
    "Tremblay",
    "Underwood",
    "Valdez",
    "Vasquez",
    "Villanueva",
    "Wainwright",
    "Weatherby",
    "Whitaker",
    "Wojcik",
    "Yamamoto",
    "Yilmaz",
    "Zielinski",
    "Zimmerman",
    "Okonkwo",
    "Haverford",
    "Ashworth",
    "Kerrigan",
    "Lundgren",
    "Montague",
    "Pemberton",
    "Rutherford",
    "Strickland",
];

pub const FIRST_NAMES: &[&str] = &[
    "Amara",
    "Benedikt",
    "Carmela",
    "Dmitri",
    "Evangeline",
    "Fernando",
    "Giselle",
    "Horatio",
    "Ingrid",
    "Jasper",
    "Katarina",
    "Leopold",
    "Marisol",
    "Nikolai",
    "Ottilie",
    "Priyanka",
    "Quentin",
    "Rosalind",
    "Sebastian",
    "Thaddeus",
    "Ulrike",
    "Valentina",
    "Wilhelmina",
    "Xiomara",
    "Yusuf",
    "Zuzanna",
    "Anneliese",
    "Bartholomew",
    "Cordelia",
    "Desmond",
];

pub const CITIES: &[&str] = &[
    "Springfield",
    "Riverton",
    "Lakewood",
    "Fairview",
    "Brookhaven",
    "Millbrook",
    "Clearwater",
    "Ashford",
    "Kingsport",
    "Westbury",
    "Oakridge",
    "Greenville",
    "Harborview",
    "Maplewood",
    "Northfield",
    "Stonebridge",
    "Pinecrest",
    "Elmhurst",
    "Cedarburg",
    "Bayside",
];

pub const STATES: &[&str] = &[
    "Ohio",
    "Oregon",
    "Vermont",
    "Nebraska",
    "Kentucky",
    "Montana",
    "Delaware",
    "Wisconsin",
];

pub const COUNTRIES: &[&str] = &["Canada", "Portugal", "Kenya", "Norway", "Chile", "Vietnam"];

pub const HOSPITALS: &[&str] = &[
    "Mercy General Hospital",
    "Saint Brigid Medical Center",
    "Lakeshore Regional",
    "Hillcrest Memorial Hospital",
    "Valley View Infirmary",
    "Northgate Children's Hospital",
];

pub const PROFESSIONS: &[&str] = &[
    "carpenter",
    "electrician",
    "accountant",
    "librarian",
    "firefighter",
    "welder",
    "pharmacist",
    "bricklayer",
    "veterinarian",
    "machinist",
];

pub const ORGANIZATIONS: &[&str] = &[
    "Acme Logistics",
    "Northwind Traders",
    "Bluewater Fisheries",
    "Summit Textiles",
    "Ironclad Mining",
];

pub const EMAIL_DOMAINS: &[&str] = &[
    "mailbox.org",
    "example.net",
    "inbox.example.com",
    "clinic-mail.org",
];

pub const MONTHS: &[&str] = &[
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];
