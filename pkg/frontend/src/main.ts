import { ApiClient } from "./api.js";
import { mount } from "./app.js";

const app = mount(document, new ApiClient(""));
void app.start();
