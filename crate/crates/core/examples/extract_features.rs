//! Lexes an Arduino sketch and an SCL function block and prints the feature
//! channels used for embedding.

use autoeng::corpus::{CodeDocument, Dialect, SourceFile};
use autoeng::featex::{extract_features, lex_source, select_features, FeatureSetSpec};

const SKETCH: &str = r#"#include <Servo.h>
// sweep a servo back and forth
Servo arm;
int pos = 0;

void setup() {
  arm.attach(9);
  Serial.begin(9600);
}

void loop() {
  for (pos = 0; pos <= 180; pos += 1) {
    arm.write(pos);   /* one degree per step */
    delay(15);
  }
  Serial.println("done");
}
"#;

const BLOCK: &str = r#"(*
FAMILY: TIMERS
on-delay with reset
*)
FUNCTION_BLOCK TON_R
VAR_INPUT IN : BOOL; PT : TIME; RST : BOOL; END_VAR
VAR_OUTPUT Q : BOOL; END_VAR
IF RST THEN
  Q := FALSE;
ELSIF IN THEN
  Q := TRUE;
END_IF;
END_FUNCTION_BLOCK
"#;

fn doc(id: &str, dialect: Dialect, text: &str) -> CodeDocument {
    CodeDocument {
        id: id.into(),
        dialect,
        sources: vec![SourceFile {
            name: "src".into(),
            text: text.into(),
        }],
        title: Some("Servo sweep".into()),
        tags: vec!["motor".into()],
        description: None,
        label: None,
        raw_components: vec![],
    }
}

fn main() {
    for (d, spec) in [
        (doc("sweep", Dialect::Arduino, SKETCH), "code,comments"),
        (doc("ton_r", Dialect::Scl, BLOCK), "code,comments"),
    ] {
        let tokens = lex_source(&d.sources[0].text, d.dialect);
        println!("== {} ({}): {} lexer tokens", d.id, d.dialect, tokens.len());
        for t in tokens.iter().take(8) {
            println!("  {:>3} {:?} {:?}", t.line, t.kind, t.text);
        }

        let bundle = extract_features(&d);
        println!("{}", serde_json::to_string_pretty(&bundle).unwrap());
        let spec: FeatureSetSpec = spec.parse().unwrap();
        println!("{spec}: {:?}\n", select_features(&bundle, &spec).unwrap());
    }
}
