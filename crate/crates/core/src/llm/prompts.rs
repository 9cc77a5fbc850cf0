//! Prompt templates, one text asset per task.
//!
//! Bundled copies live in `crates/core/prompts/<task>.txt`. A directory named
//! by `GLOSS_PROMPT_DIR` may override any of them at runtime. The first line of
//! each asset is a `# prompt: <task> <version>` header and is not sent to the
//! model.

use std::io;
use std::path::Path;

use super::Task;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub version: String,
    pub text: String,
}

impl PromptTemplate {
    fn parse(source: &str) -> Self {
        let (version, text) = match source.split_once('\n') {
            Some((first, rest)) if first.starts_with("# prompt:") => {
                let version = first.split_whitespace().nth(3).unwrap_or("unversioned");
                (version.to_string(), rest)
            }
            _ => ("unversioned".to_string(), source),
        };
        Self {
            version,
            text: text.trim().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCatalogue {
    generate: PromptTemplate,
    classify: PromptTemplate,
    branch: PromptTemplate,
    feedback: PromptTemplate,
}

const BUNDLED: [(Task, &str); 4] = [
    (Task::Generate, include_str!("../../prompts/generate.txt")),
    (Task::Classify, include_str!("../../prompts/classify.txt")),
    (Task::Branch, include_str!("../../prompts/branch.txt")),
    (Task::Feedback, include_str!("../../prompts/feedback.txt")),
];

impl PromptCatalogue {
    pub fn bundled() -> Self {
        let [g, c, b, f] = BUNDLED.map(|(_, src)| PromptTemplate::parse(src));
        Self {
            generate: g,
            classify: c,
            branch: b,
            feedback: f,
        }
    }

    /// Bundled templates, with any `<task>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> io::Result<Self> {
        let mut cat = Self::bundled();
        for task in [Task::Generate, Task::Classify, Task::Branch, Task::Feedback] {
            let file = dir.join(format!("{}.txt", task.as_str()));
            match std::fs::read_to_string(&file) {
                Ok(src) => *cat.slot(task) = PromptTemplate::parse(&src),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(cat)
    }

    /// Bundled catalogue, overridden from `GLOSS_PROMPT_DIR` when set.
    pub fn from_env() -> io::Result<Self> {
        match std::env::var_os("GLOSS_PROMPT_DIR") {
            Some(dir) => Self::with_overrides(Path::new(&dir)),
            None => Ok(Self::bundled()),
        }
    }

    pub fn get(&self, task: Task) -> &PromptTemplate {
        match task {
            Task::Generate => &self.generate,
            Task::Classify => &self.classify,
            Task::Branch => &self.branch,
            Task::Feedback => &self.feedback,
        }
    }

    fn slot(&mut self, task: Task) -> &mut PromptTemplate {
        match task {
            Task::Generate => &mut self.generate,
            Task::Classify => &mut self.classify,
            Task::Branch => &mut self.branch,
            Task::Feedback => &mut self.feedback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_are_versioned() {
        let cat = PromptCatalogue::bundled();
        for task in [Task::Generate, Task::Classify, Task::Branch, Task::Feedback] {
            let t = cat.get(task);
            assert_eq!(t.version, "v1", "{task:?}");
            assert!(!t.text.starts_with("# prompt"));
            assert!(!t.text.is_empty());
        }
    }

    #[test]
    fn directory_overrides_single_task() {
        let dir = std::env::temp_dir().join(format!("gloss-prompts-{}", uuid::Uuid::new_v4()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("feedback.txt"), "# prompt: feedback v7\nBe brief.\n").unwrap();
        let cat = PromptCatalogue::with_overrides(&dir).unwrap();
        assert_eq!(cat.get(Task::Feedback).version, "v7");
        assert_eq!(cat.get(Task::Feedback).text, "Be brief.");
        assert_eq!(cat.get(Task::Classify), PromptCatalogue::bundled().get(Task::Classify));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
