//! Test functions with known derivatives and safe sampling boxes.

use rand::Rng;

/// Uniform sampling interval for one parameter; values with
/// `|x| < exclude_below` are rejected and redrawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
    pub exclude_below: f64,
}

impl SampleBox {
    pub const fn new(lo: f64, hi: f64) -> Self {
        SampleBox {
            lo,
            hi,
            exclude_below: 0.0,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        loop {
            let x = rng.random_range(self.lo..self.hi);
            if x.abs() >= self.exclude_below && x != self.lo {
                return x;
            }
        }
    }
}

/// Box used for parameters of user-supplied sources.
pub const DEFAULT_BOX: SampleBox = SampleBox::new(0.1, 1.0);

#[derive(Debug, Clone)]
pub struct CorpusFunction {
    pub name: String,
    pub source: String,
    pub func: String,
    pub energy: String,
    pub vars: Vec<String>,
    /// Sampling box per parameter name; parameters not listed use [`DEFAULT_BOX`].
    pub boxes: Vec<(String, SampleBox)>,
    pub s: Option<usize>,
}

impl CorpusFunction {
    pub fn box_for(&self, param: &str) -> SampleBox {
        self.boxes
            .iter()
            .find(|(p, _)| p == param)
            .map_or(DEFAULT_BOX, |(_, b)| *b)
    }
}

pub const NAMES: &[&str] = &["eq1", "eq2", "eq3", "cross_entropy", "function_0", "const_fn"];

/// Looks up a corpus entry. `s` is the dimension of `eq3` (default 2) and
/// is ignored by the other entries.
pub fn get(name: &str, s: Option<usize>) -> Option<CorpusFunction> {
    let x = |b: SampleBox| vec![("x".to_string(), b)];
    let (source, vars, boxes, s) = match name {
        "eq1" => (
            "double eq1(double x){
    double energy = (pow(x, 2) + 3*x - x/4)/x + pow(x, 4) + 22.0/7.0*pow(x, 3) + pow(x, 9);
    return 0;
}
"
            .to_string(),
            vec!["x"],
            x(SampleBox {
                lo: -2.0,
                hi: 2.0,
                exclude_below: 0.1,
            }),
            None,
        ),
        "eq2" => (
            "double eq2(double x){
    double energy = sin(x) + cos(x) + pow(x, 2);
    return 0;
}
"
            .to_string(),
            vec!["x"],
            x(SampleBox::new(-3.0, 3.0)),
            None,
        ),
        "eq3" => {
            let s = s.unwrap_or(2);
            (eq3_source(s), vec!["x"], x(SampleBox::new(0.0, 1.0)), Some(s))
        }
        "cross_entropy" => (
            "double cross_entropy(const double **a, const double **b){
    double loss = 0;
    for(int i = 0; i < 2; i++){
        for(int j = 0; j < 2; j++ ){
            loss = loss - (b[i][j] * log(a[i][j] + 0.00001));
        }
    }
    return loss;
}
"
            .to_string(),
            vec!["a"],
            vec![
                ("a".to_string(), SampleBox::new(0.01, 1.0)),
                ("b".to_string(), SampleBox::new(0.0, 1.0)),
            ],
            None,
        ),
        "function_0" => (
            "int function_0(double x){
    double energy = pow(x, 4) - 3*pow(x, 3) + 2;
    return 0;
}
"
            .to_string(),
            vec!["x"],
            x(SampleBox::new(-1.0, 4.0)),
            None,
        ),
        "const_fn" => (
            "double const_fn(double x, double y){
    double energy = 5;
    return 0;
}
"
            .to_string(),
            vec!["x", "y"],
            vec![],
            None,
        ),
        _ => return None,
    };
    let energy = if name == "cross_entropy" { "loss" } else { "energy" };
    Some(CorpusFunction {
        name: name.to_string(),
        source,
        func: name.to_string(),
        energy: energy.to_string(),
        vars: vars.into_iter().map(String::from).collect(),
        boxes,
        s,
    })
}

/// `4^s * prod x_i (1 - x_i)` written as a loop over `s` entries.
pub fn eq3_source(s: usize) -> String {
    format!(
        "double eq3(const double *x){{
    double energy = 1;
    for (int i = 0; i < {s}; i++) {{
        energy = energy * 4 * x[i] * (1 - x[i]);
    }}
    return 0;
}}
"
    )
}
