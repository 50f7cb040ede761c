//! Demographics and technical-background question bank.

use serde::{Deserialize, Serialize};

pub const OWNERSHIP_QUESTION_ID: &str = "iot_ownership";
pub const OWNS_DEVICES: &str = "Own 1 or more smart home devices";
pub const OWNS_NO_DEVICES: &str = "Own 0 smart home devices";
pub const OWNERSHIP_UNKNOWN: &str = "I don't know";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographicQuestion {
    pub question_id: String,
    pub text: String,
    pub options: Vec<String>,
}

impl DemographicQuestion {
    fn new(id: &str, text: &str, options: &[&str]) -> Self {
        DemographicQuestion {
            question_id: id.to_string(),
            text: text.to_string(),
            options: options.iter().map(|o| o.to_string()).collect(),
        }
    }

    pub fn accepts(&self, option: &str) -> bool {
        self.options.iter().any(|o| o == option)
    }
}

/// Smart-home device ownership in a respondent's answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ownership {
    Owner,
    NonOwner,
    Unknown,
}

impl Ownership {
    pub fn from_option(option: &str) -> Option<Ownership> {
        match option {
            OWNS_DEVICES => Some(Ownership::Owner),
            OWNS_NO_DEVICES => Some(Ownership::NonOwner),
            OWNERSHIP_UNKNOWN => Some(Ownership::Unknown),
            _ => None,
        }
    }

    pub fn option(self) -> &'static str {
        match self {
            Ownership::Owner => OWNS_DEVICES,
            Ownership::NonOwner => OWNS_NO_DEVICES,
            Ownership::Unknown => OWNERSHIP_UNKNOWN,
        }
    }
}

const PREFER_NOT: &str = "Prefer not to disclose";

pub fn default_bank() -> Vec<DemographicQuestion> {
    vec![
        DemographicQuestion::new(
            "gender",
            "What is your gender?",
            &["Female", "Male", "Other", PREFER_NOT],
        ),
        DemographicQuestion::new(
            "age",
            "What is your age?",
            &[
                "18-24 years old",
                "25-34 years old",
                "35-44 years old",
                "45-54 years old",
                "55-64 years old",
                "65-74 years old",
                "75 years or older",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "education",
            "What is the highest level of school you have completed or the highest degree you have received?",
            &[
                "Nursery school to 8th grade",
                "Some high school, no diploma",
                "High school graduate, diploma or the equivalent",
                "Trade/technical/vocational training",
                "Some college credit, no degree",
                "Associate degree",
                "Bachelor's degree",
                "Master's degree",
                "Professional degree",
                "Doctorate degree",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "income",
            "What is your annual household income?",
            &[
                "Less than $10k",
                "$10k - $20k",
                "$20k - $30k",
                "$30k - $40k",
                "$40k - $50k",
                "$50k - $60k",
                "$60k - $70k",
                "$70k - $80k",
                "$80k - $90k",
                "$90k - $100k",
                "$100k - $150k",
                "More than $150,000",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "politics",
            "Which political party do you most identify with?",
            &["Democrat", "Republican", "Independent", PREFER_NOT],
        ),
        DemographicQuestion::new(
            "household",
            "Who do you live with?",
            &[
                "Live with family",
                "Live alone",
                "Live with one or more non-family roommates",
                "Other",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "residence",
            "Which best describes the building you live in?",
            &[
                "A one-family house detached from any other house",
                "A one-family house attached to one or more houses",
                "A building with fewer than 10 apartments",
                "A building with 10 or more apartments",
                "A mobile home",
                "A dormitory",
                "A boat, RV, van, etc.",
                "Other",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "area",
            "How would you describe the area where you live?",
            &["Urban", "Suburban", "Rural"],
        ),
        DemographicQuestion::new(
            "marital_status",
            "What is your marital status?",
            &[
                "Married or domestic partnership",
                "Single, never married",
                "Divorced",
                "Separated",
                "Widowed",
                PREFER_NOT,
            ],
        ),
        DemographicQuestion::new(
            "children",
            "Do you have children under 16?",
            &["No children under 16", "Children under 16", PREFER_NOT],
        ),
        DemographicQuestion::new(
            "internet_use",
            "How many hours per day do you use the Internet?",
            &[
                "0-3 hours Internet use per day",
                "4-7 hours Internet use per day",
                "8-12 hours Internet use per day",
                ">12 hours Internet use per day",
            ],
        ),
        DemographicQuestion::new(
            OWNERSHIP_QUESTION_ID,
            "How many 'smart' (Internet-connected) devices or appliances do you have in your home, besides a smartphone, tablet, laptop, or desktop computer?",
            &[OWNS_NO_DEVICES, OWNS_DEVICES, OWNERSHIP_UNKNOWN],
        ),
        DemographicQuestion::new(
            "iot_setup",
            "If you own smart home devices, who set them up?",
            &[
                "I set up my smart home devices",
                "Someone else set up my smart home devices",
                "I don't remember who set up my smart home devices",
                "I don't own smart home devices",
            ],
        ),
    ]
}
