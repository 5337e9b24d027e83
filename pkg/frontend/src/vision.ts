// The server folds image analysis into the prompt as three labeled lines.
// Pulling them back out lets the UI show what the model was told about the
// snapshot without any extra endpoint.

export type VisionInfo = {
  caption: string;
  objects: string[];
  tags: string[];
};

function splitList(rest: string): string[] {
  return rest === "" ? [] : rest.split(", ");
}

export function visionFromPrompt(prompt: string): VisionInfo | null {
  const lines = prompt.split("\n");
  for (let i = 0; i + 2 < lines.length; i++) {
    if (
      lines[i].startsWith("Image caption: ") &&
      lines[i + 1].startsWith("Objects:") &&
      lines[i + 2].startsWith("Tags:")
    ) {
      return {
        caption: lines[i].slice("Image caption: ".length),
        objects: splitList(lines[i + 1].slice("Objects:".length).trimStart()),
        tags: splitList(lines[i + 2].slice("Tags:".length).trimStart()),
      };
    }
  }
  return null;
}
